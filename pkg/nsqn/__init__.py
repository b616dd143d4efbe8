"""Stochastic quasi-Newton training of recurrent networks: aSNAQ, adaQN and baselines."""
