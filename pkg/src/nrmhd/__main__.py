import sys

from nrmhd.cli import main

sys.exit(main())
