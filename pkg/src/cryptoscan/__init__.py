"""Static analyzer that finds cryptographic API misuse in JVM class files.

Pipeline: parse class files natively, locate calls into a catalog of
security-relevant APIs, slice backward to resolve the watched arguments
to compile-time constants, evaluate misuse rules over the resolved
evidence, and emit partitioned reports (streaming or buffered) in three
formats.
"""

__version__ = "0.1.0"

from .catalog import ApiTarget, Catalog, Severity, load_catalog
from .classfile import (
    ClassFile,
    ClassFileError,
    CodeBody,
    ConstantEntry,
    MemberInfo,
    decode_method_body,
    enumerate_archive_classes,
    fully_qualified_name,
    parse_class_file,
)
from .cli import ScanConfig, check_environment, enumerate_help, main, parse_args, run_scan
from .intake import (
    BuildTool,
    ScanSet,
    SourceType,
    assemble_scan_set,
    fqn_from_source,
    resolve_dependency_dirs,
)
from .output import (
    FormatKind,
    OutputFormat,
    OutputSession,
    add_issue,
    start_analyzing,
    stop_analyzing,
    validate_document,
)
from .rules import BugInstance, Rule, evaluate, rule_catalog, run_rules
from .slicer import (
    Constant,
    FieldConstant,
    IrIndex,
    MethodIR,
    Slice,
    SliceCriterion,
    Unknown,
    backward_slice,
    build_method_ir,
    find_criteria,
    resolve_constant,
)

__all__ = [
    "ApiTarget", "BugInstance", "BuildTool", "Catalog", "ClassFile",
    "ClassFileError", "CodeBody", "Constant", "ConstantEntry", "FieldConstant",
    "FormatKind", "IrIndex", "MemberInfo", "MethodIR", "OutputFormat",
    "OutputSession", "Rule", "ScanConfig", "ScanSet", "Severity", "Slice",
    "SliceCriterion", "SourceType", "Unknown", "add_issue", "assemble_scan_set",
    "backward_slice", "build_method_ir", "check_environment",
    "decode_method_body", "enumerate_archive_classes", "enumerate_help",
    "evaluate", "find_criteria", "fqn_from_source", "fully_qualified_name",
    "load_catalog", "main", "parse_args", "parse_class_file",
    "resolve_constant", "resolve_dependency_dirs", "rule_catalog", "run_rules",
    "run_scan", "start_analyzing", "stop_analyzing", "validate_document",
]
