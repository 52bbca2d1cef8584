"""Model families: Gaussian HMMs, fuzzy cognitive maps and their optimisers."""
