"""Tests for Enterprise DNA"""

