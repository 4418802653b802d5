import logging
import sys

from src.experiments.cli import main

# Set up basic logging
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Run stopped by user")
        sys.exit(130)
    except Exception as e:
        logger.error(f"radwave crashed: {e}", exc_info=True)
        raise
