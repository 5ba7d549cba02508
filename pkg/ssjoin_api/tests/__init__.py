"""
Test package for the ssjoin_api library.
"""
