from indexfund.cli import main
import sys

sys.exit(main())
