import sys

from procline.cli import main

sys.exit(main())
