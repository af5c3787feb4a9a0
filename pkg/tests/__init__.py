"""Test package for drank"""
