"""Influence, self-avoiding-walk trees and simplicial complex analysis."""
