"""
Unit and command-line tests of the registration package
"""
