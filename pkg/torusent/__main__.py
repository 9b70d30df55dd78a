import sys

from torusent.cli import main

sys.exit(main())
