TENSOR_MAGIC = b"TACOTNSR"
TENSOR_VERSION = 1
TENSOR_HEADER_BYTES = 20  # magic + u32 version + u64 count

ARCHIVE_MAGIC = b"TACOCMP1"
ARCHIVE_HEADER_BYTES = 22  # magic + u8 kind + u8 format + u32 B + u64 N
BLOCK_METADATA_BYTES = 8  # alpha_k + s_k, float32 each

MIN_BLOCK_SIZE = 2
MAX_BLOCK_SIZE = 2 ** 15

DEFAULT_BINS = 64
DEFAULT_SWEEP_SIZES = (32, 64, 128, 256, 512)
