"""
Numerical systems
"""
