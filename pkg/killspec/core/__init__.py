"""
Configuration, caching and pipeline control
"""
