"""
Data types shared by the systems
"""
