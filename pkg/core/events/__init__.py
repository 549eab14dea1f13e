# core/events/__init__.py
