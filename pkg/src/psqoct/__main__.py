import sys

from psqoct.cli import main

sys.exit(main())
