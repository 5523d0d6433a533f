import sys

from aeroground.cli import main

sys.exit(main())
