"""Latin hypercube designs, GP/SVR surrogates and the local refinement loop."""
