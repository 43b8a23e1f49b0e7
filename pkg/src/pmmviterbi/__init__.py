"""Pairwise Markov model Viterbi toolkit."""
