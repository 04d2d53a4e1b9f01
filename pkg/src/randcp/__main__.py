from randcp.cli import main

raise SystemExit(main())
