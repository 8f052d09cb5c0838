import sys

from sawguide.cli import main

sys.exit(main())
