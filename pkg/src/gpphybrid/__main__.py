import sys

from gpphybrid.cli import main

sys.exit(main())
