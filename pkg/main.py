import sys
from noc_sentinel.pipeline.steps import main


if __name__ == "__main__":
    sys.exit(main())
