import sys

from linkqueue.cli import main

sys.exit(main())
