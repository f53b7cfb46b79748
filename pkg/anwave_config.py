#!/usr/bin/env python3
"""
Preset utility for anwave

Lists and shows the builtin experiment presets, exports a preset as a
key = value config file, checks a config file without running it, and saves
a config file as a named user preset.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from config import ConfigParseError, get_config, parse_config


def list_presets():
    """List all available presets"""
    config = get_config()
    presets = config.list_presets()

    print("Available presets:")
    print("=" * 50)
    for name, description in presets.items():
        print(f"  {name:<20} - {description}")
    print()


def show_preset(preset_name: str) -> bool:
    """Show the full settings of a preset"""
    config = get_config()
    preset = config.get_preset(preset_name)

    if not preset:
        print(f"Preset '{preset_name}' not found")
        return False

    print(f"Preset: {preset.name}")
    print(f"Description: {preset.description}")
    print("\nSettings:")
    for line in preset.config.to_text().splitlines():
        print(f"  {line}")

    return True


def export_preset(preset_name: str, output_file: str) -> bool:
    """Write a preset as a complete config file"""
    preset = get_config().get_preset(preset_name)
    if not preset:
        print(f"Preset '{preset_name}' not found")
        return False

    try:
        output_path = Path(output_file)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(f"# {preset.description}\n" + preset.config.to_text(), encoding="utf-8")
        print(f"Preset {preset_name} exported to {output_path}")
        return True
    except OSError as e:
        print(f"Error exporting preset: {e}")
        return False


def check_config(input_file: str) -> bool:
    """Parse and validate a config file"""
    try:
        text = Path(input_file).read_text(encoding="utf-8")
        run_config = parse_config(text)
    except OSError as e:
        print(f"Error reading {input_file}: {e}")
        return False
    except ConfigParseError as e:
        print(f"{input_file}: {e}")
        return False

    print(f"{input_file}: OK ({run_config.command}, {run_config.equation})")
    return True


def save_preset(preset_name: str, input_file: str, description: str) -> bool:
    """Store a config file as a user preset"""
    config = get_config()
    if preset_name in config.list_presets():
        print(f"Preset '{preset_name}' already exists")
        return False
    try:
        run_config = parse_config(Path(input_file).read_text(encoding="utf-8"))
    except (OSError, ConfigParseError) as e:
        print(f"Error reading {input_file}: {e}")
        return False

    config.add_preset(preset_name, description, run_config)
    if config.save_config():
        print(f"Preset {preset_name} saved")
        return True
    print("Error saving preset")
    return False


def main(argv: Optional[List[str]] = None):
    """Main entry point"""
    parser = argparse.ArgumentParser(
        description="Manage anwave presets and check configuration files",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    subparsers.add_parser('list', help='List available presets')

    show_parser = subparsers.add_parser('show', help='Show preset settings')
    show_parser.add_argument('preset', help='Preset name to show')

    export_parser = subparsers.add_parser('export', help='Export a preset to a config file')
    export_parser.add_argument('preset', help='Preset name')
    export_parser.add_argument('file', help='Output file path')

    check_parser = subparsers.add_parser('check', help='Validate a config file')
    check_parser.add_argument('file', help='Config file path')

    save_parser = subparsers.add_parser('save', help='Save a config file as a user preset')
    save_parser.add_argument('preset', help='New preset name')
    save_parser.add_argument('file', help='Config file path')
    save_parser.add_argument('--description', default='Custom preset', help='Preset description')

    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return

    # Load user presets
    get_config().load_config()

    if args.command == 'list':
        list_presets()
    elif args.command == 'show':
        if not show_preset(args.preset):
            sys.exit(1)
    elif args.command == 'export':
        if not export_preset(args.preset, args.file):
            sys.exit(1)
    elif args.command == 'check':
        if not check_config(args.file):
            sys.exit(1)
    elif args.command == 'save':
        if not save_preset(args.preset, args.file, args.description):
            sys.exit(1)


if __name__ == "__main__":
    main()
