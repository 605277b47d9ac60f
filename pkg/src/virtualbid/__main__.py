import sys
from virtualbid.cli import main

sys.exit(main())
