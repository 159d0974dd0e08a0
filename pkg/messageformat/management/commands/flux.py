"""
``manage.py flux``: check specifications, export graphs, generate parsers and
validate message files.

Exit status is 0 on success, 1 if a specification or message is rejected and
2 on usage errors.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from django.core.management.base import BaseCommand, CommandError

from messageformat.codegen import CodegenOptions, generate_all
from messageformat.conf import flux_setting
from messageformat.derive import derive_parser
from messageformat.dsl import Elaboration, RefinementDecl, SpecFile, elaborate_all, parse_spec
from messageformat.exceptions import Location, SpecElaborationError, SpecParseError, UnknownNameError
from messageformat.formatters import formatter
from messageformat.runtime import MessageBuffer, field_access, field_valid, is_valid, label

logger = logging.getLogger(__name__)

SPEC_SUFFIX = ".rflx"


@dataclass
class Workspace:
    """Parsed specifications by lower-case package name, with their files."""

    specs: Dict[str, Tuple[Path, SpecFile]] = field(default_factory=dict)
    diagnostics: List[Tuple[tuple, str]] = field(default_factory=list)
    elaboration: Optional[Elaboration] = None

    def report(self, source: Path, location: Optional[Location], message: str) -> None:
        self.diagnostics.append(
            (formatter.sort_key(str(source), location), formatter.diagnostic(str(source), location, message))
        )

    def sorted_diagnostics(self) -> List[str]:
        return [text for _, text in sorted(self.diagnostics)]

    def source(self, package: Optional[str]) -> Path:
        if package is not None and package.lower() in self.specs:
            return self.specs[package.lower()][0]
        return Path("<workspace>")


class Command(BaseCommand):
    help = "Check, visualize, generate and run message format specifications."

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")

        check = subparsers.add_parser("check", help="parse, elaborate and validate specifications")
        check.add_argument("specs", nargs="+", type=Path, metavar="SPEC")

        graph = subparsers.add_parser("graph", help="print the graph of a message in DOT format")
        graph.add_argument("spec", type=Path)
        graph.add_argument("message")
        graph.add_argument("--dot", type=Path, help="write the graph to this file instead of stdout")

        generate = subparsers.add_parser("generate", help="generate parser modules")
        generate.add_argument("specs", nargs="+", type=Path, metavar="SPEC")
        generate.add_argument("--out", type=Path, required=True, help="output directory")

        validate = subparsers.add_parser("validate", help="validate a message file (.bin or .hex)")
        validate.add_argument("spec", type=Path)
        validate.add_argument("message")
        validate.add_argument("data", type=Path)
        validate.add_argument("--field", action="append", default=[], dest="fields", metavar="NAME")

    def handle(self, *args, **options):
        handler = getattr(self, f"handle_{options['subcommand']}")
        handler(**options)

    # specification loading

    def read_text(self, path: Path) -> str:
        try:
            return path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise CommandError(f"cannot read {path}: {e}", returncode=1)

    def load(self, paths: Sequence[Path]) -> Workspace:
        """Parse ``paths`` plus the packages their refinements refer to, then elaborate."""
        workspace = Workspace()
        pending = list(paths)
        while pending:
            path = pending.pop(0)
            try:
                spec = parse_spec(self.read_text(path))
            except SpecParseError as e:
                for error in e.errors:
                    workspace.report(path, error.location, str(error))
                continue
            key = spec.package_name.lower()
            if key in workspace.specs:
                if workspace.specs[key][0].resolve() != path.resolve():
                    workspace.report(path, spec.location, f"package {spec.package_name} is declared twice")
                continue
            workspace.specs[key] = (path, spec)
            for package in self.referenced_packages(spec):
                if package.lower() not in workspace.specs:
                    found = self.discover(package, path)
                    if found is not None and found not in pending:
                        pending.append(found)

        if workspace.diagnostics:
            return workspace
        try:
            workspace.elaboration = elaborate_all([spec for _, spec in workspace.specs.values()])
        except SpecElaborationError as e:
            for error in e.errors:
                workspace.report(workspace.source(error.package), error.location, str(error))
        return workspace

    @staticmethod
    def referenced_packages(spec: SpecFile) -> List[str]:
        packages = []
        for declaration in spec.type_declarations:
            if isinstance(declaration, RefinementDecl):
                for name in (declaration.outer, declaration.inner):
                    if "." in name:
                        packages.append(name.split(".")[0])
        return packages

    def discover(self, package: str, near: Path) -> Optional[Path]:
        file_name = package.lower() + SPEC_SUFFIX
        for directory in [near.parent, *map(Path, flux_setting("SPEC_DIRS"))]:
            candidate = directory / file_name
            if candidate.is_file():
                logger.debug("found package %s in %s", package, candidate)
                return candidate
        logger.warning("no specification file for package %s", package)
        return None

    def load_clean(self, paths: Sequence[Path]) -> Workspace:
        workspace = self.load(paths)
        if workspace.diagnostics:
            for line in workspace.sorted_diagnostics():
                self.stderr.write(line)
            raise CommandError(f"{len(workspace.diagnostics)} problem(s) found", returncode=1)
        return workspace

    @staticmethod
    def message(workspace: Workspace, name: str):
        try:
            return workspace.elaboration.message(name)
        except UnknownNameError as e:
            raise CommandError(str(e), returncode=1)

    # subcommands

    def handle_check(self, specs, **options):
        workspace = self.load_clean(specs)
        elaboration = workspace.elaboration
        for key, (path, spec) in workspace.specs.items():
            messages = [m for m in elaboration.messages if m.message_name.lower().startswith(key + ".")]
            refinements = [r for r in elaboration.refinements if any(
                r.name.lower() == d.name.lower() for d in spec.type_declarations
            )]
            self.stdout.write(
                self.style.SUCCESS(f"{path}: ok ({len(messages)} messages, {len(refinements)} refinements)")
            )

    def handle_graph(self, spec, message, dot=None, **options):
        workspace = self.load_clean([spec])
        text = formatter.to_dot(self.message(workspace, message))
        if dot is None:
            self.stdout.write(text, ending="")
            return
        try:
            dot.write_text(text, encoding="utf-8")
        except OSError as e:
            raise CommandError(f"cannot write {dot}: {e}", returncode=1)
        self.stdout.write(str(dot))

    def handle_generate(self, specs, out, **options):
        workspace = self.load_clean(specs)
        elaboration = workspace.elaboration
        parsers = [derive_parser(graph) for graph in elaboration.messages]
        codegen_options = CodegenOptions(
            support_module=flux_setting("SUPPORT_MODULE"),
            debug_assertions=flux_setting("DEBUG_ASSERTIONS"),
        )
        files = generate_all(parsers, elaboration.refinements, codegen_options)
        try:
            out.mkdir(parents=True, exist_ok=True)
            for name, text in files.items():
                (out / name).write_text(text, encoding="utf-8")
        except OSError as e:
            raise CommandError(f"cannot write to {out}: {e}", returncode=1)
        for name in files:
            self.stdout.write(str(out / name))

    def read_data(self, path: Path) -> bytes:
        try:
            if path.suffix.lower() == ".hex":
                return bytes.fromhex("".join(path.read_text(encoding="ascii").split()))
            return path.read_bytes()
        except (OSError, UnicodeDecodeError, ValueError) as e:
            raise CommandError(f"cannot read {path}: {e}", returncode=1)

    def handle_validate(self, spec, message, data, fields=(), **options):
        workspace = self.load_clean([spec])
        graph = self.message(workspace, message)
        parser = derive_parser(graph)
        buffer = label(MessageBuffer(self.read_data(data)), graph.message_name)

        for name in fields:
            field_id = graph.field(name)
            if field_id is None:
                raise CommandError(f"{graph.message_name} has no field {name}", returncode=1)
            found = field_access(parser, field_id, buffer) if field_valid(parser, field_id, buffer) else None
            for line in formatter.field_report(field_id.name, graph.fields[field_id], found):
                self.stdout.write(line)

        if is_valid(parser, buffer):
            self.stdout.write(self.style.SUCCESS(f"{data}: valid {graph.message_name}"))
            return
        self.stdout.write(self.style.ERROR(f"{data}: invalid {graph.message_name}"))
        raise CommandError(f"{data} is not a valid {graph.message_name}", returncode=1)
