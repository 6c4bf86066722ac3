import sys

from pyconformaltrain.cli import main

sys.exit(main())
