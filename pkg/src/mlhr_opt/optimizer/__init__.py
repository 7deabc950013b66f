"""NSGA-II with constrained dominance, plus Pareto utilities and test problems."""
