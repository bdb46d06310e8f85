import sys

from eegdiff.cli import main

sys.exit(main())
