"""
API Utilities Package.

Contains the in-process run state store.
"""
