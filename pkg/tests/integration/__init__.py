"""
Cross-module tests: corpus against goal tracking, training, the pipeline.
"""
