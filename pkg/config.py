import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    TACO_LOG_LEVEL = os.getenv("TACO_LOG_LEVEL", "INFO").upper()

    TACO_BLOCK_SIZE = int(os.getenv("TACO_BLOCK_SIZE", "256"))
    TACO_TARGET_ENERGY = float(os.getenv("TACO_TARGET_ENERGY", "1.0"))
    TACO_EPSILON = float(os.getenv("TACO_EPSILON", "1e-12"))
    TACO_FORMAT = os.getenv("TACO_FORMAT", "e4m3").lower()

    # overlap chunk knob for the collective simulator, 64 MiB like the tuned transport
    TACO_CHUNK_BYTES = int(os.getenv("TACO_CHUNK_BYTES", str(64 * 1024 * 1024)))

    @property
    def TACO_THREADS(self):
        raw = os.getenv("TACO_THREADS")
        if raw:
            return max(1, int(raw))
        return os.cpu_count() or 1


config = Config()
