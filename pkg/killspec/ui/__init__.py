"""
Console report and artifact export
"""
