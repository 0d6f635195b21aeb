#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Supply Chain Auction Simulator
Command-line entry point
"""

from dotenv import load_dotenv

from src.cli import main

# Environment variables
load_dotenv()

if __name__ == "__main__":
    main()
