from markovlab.app import main

main()
