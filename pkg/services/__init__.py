"""Services for GridSync Screener: study pipeline and report payloads"""
