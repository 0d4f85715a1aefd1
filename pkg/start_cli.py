#!/usr/bin/env python
"""
Startup script for the infodesign command-line tool
"""
import sys
from pathlib import Path

# Add src directory to Python path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

if __name__ == "__main__":
    try:
        from main import main
    except ImportError as e:
        print(f"❌ Import error: {e}", file=sys.stderr)
        print("💡 Make sure you have installed all dependencies:", file=sys.stderr)
        print("   pip install -r requirements.txt", file=sys.stderr)
        sys.exit(1)
    sys.exit(main())
