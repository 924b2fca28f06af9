import sys

from topobreak.cli.main import main

sys.exit(main())
