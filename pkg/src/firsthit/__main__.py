import sys

from firsthit.cli import main

sys.exit(main())
