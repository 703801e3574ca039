from tilelab.cli.main import main

main()
