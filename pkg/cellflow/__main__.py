import sys

from cellflow.main import main

sys.exit(main())
