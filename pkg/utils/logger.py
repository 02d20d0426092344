import logging

from config import config

logging.basicConfig(
    level=getattr(logging, config.TACO_LOG_LEVEL, logging.INFO),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger("taco")
