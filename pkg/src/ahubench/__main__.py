import sys

from ahubench.cli import main

sys.exit(main())
