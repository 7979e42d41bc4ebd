"""stnlab command-line interface"""
