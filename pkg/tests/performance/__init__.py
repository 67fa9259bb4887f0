"""
Timing checks for generation and the tiny transformer.
"""
