import sys

from fairtail.cli import main

sys.exit(main())
