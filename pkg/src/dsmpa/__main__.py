import sys

from dsmpa.cli import main

sys.exit(main())
