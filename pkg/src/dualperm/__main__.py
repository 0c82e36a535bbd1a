import sys

from dualperm.cli import main

sys.exit(main())
