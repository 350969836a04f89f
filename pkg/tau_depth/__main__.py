import sys

from tau_depth.cli import main

sys.exit(main())
