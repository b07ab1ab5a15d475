import sys

from webmeasure.cli import main

sys.exit(main())
