import sys

from postfixgp.cli import main

sys.exit(main())
