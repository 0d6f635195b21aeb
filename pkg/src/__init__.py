"""
Supply Chain Auction Simulator
Decentralized supply chain formation with simultaneous ascending auctions
"""

__version__ = "1.0.0"
