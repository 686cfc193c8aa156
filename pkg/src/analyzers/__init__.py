"""Analyzers: decomposition, radiomics, boosting and evaluation."""
