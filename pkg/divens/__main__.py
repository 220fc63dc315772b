import sys

from divens.cli import main

sys.exit(main())
