﻿"""Test package for the vendor portal application"""
