"""Results of the acceptance criteria, collected for the terminal summary."""
RESULTS = {}
