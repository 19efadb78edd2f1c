"""
Initialize the tests package
"""
