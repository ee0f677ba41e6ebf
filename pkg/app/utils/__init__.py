"""
Report file and table helpers.
"""
