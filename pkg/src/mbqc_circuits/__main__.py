from mbqc_circuits.cli import main

raise SystemExit(main())
