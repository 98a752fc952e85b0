"""Fixture corpus generators: seeded misuses, clean twins, name corpora.

Each misuse class is built by construction to contain exactly one
catalogued call with a compile-time-constant watched argument; its
clean twin has the identical call shape with the constant replaced by
a runtime value (a method parameter), so ground truth for recall and
precision is known exactly.
"""

import zipfile

from classbuilder import ACC_STATIC, ClassBuilder, T_BYTE

CIPHER = ("javax/crypto/Cipher", "getInstance",
          "(Ljava/lang/String;)Ljavax/crypto/Cipher;")
DIGEST = ("java/security/MessageDigest", "getInstance",
          "(Ljava/lang/String;)Ljava/security/MessageDigest;")
GET_CONNECTION = ("java/sql/DriverManager", "getConnection",
                  "(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;)Ljava/sql/Connection;")
SECRET_KEY_SPEC = ("javax/crypto/spec/SecretKeySpec", "<init>",
                   "([BLjava/lang/String;)V")
IV_SPEC = ("javax/crypto/spec/IvParameterSpec", "<init>", "([B)V")
PBE_PARAM_SPEC = ("javax/crypto/spec/PBEParameterSpec", "<init>", "([BI)V")
RANDOM_INIT = ("java/util/Random", "<init>", "(J)V")
URL_INIT = ("java/net/URL", "<init>", "(Ljava/lang/String;)V")

ECB_TRANSFORM = "AES/ECB/PKCS5Padding"
WEAK_HASH = "MD5"
ADMIN_PASSWORD = "admin"
JDBC_URL = "jdbc:mysql://db.example.com/app"
CLEARTEXT_URL = "http://example.com/config"
SEED_VALUE = 12345
KEY_BYTES = bytes(range(0x41, 0x49))       # 8 bytes, 'A'..'H'
IV_BYTES = bytes(range(8))
SALT_BYTES = bytes([9, 8, 7, 6, 5, 4, 3, 2])


def _fill_array(values, atype):
    """Instructions building a filled primitive array, left on the stack."""
    ops = [("bipush", len(values)), ("newarray", atype)]
    for i, v in enumerate(values):
        ops += [("dup",), ("bipush", i), ("bipush", v), ("bastore" if atype == T_BYTE else "castore",)]
    return ops


def build_misuse_class(rule_id: str, internal_name: str, with_lines: bool = False) -> bytes:
    """One class with exactly one planted misuse for the given rule."""
    b = ClassBuilder(internal_name)
    lines = [(0, 20 + len(rule_id))] if with_lines else None

    if rule_id == "ecb-mode":
        b.add_method("doCipher", "()V", [
            ("ldc", b.pool.string(ECB_TRANSFORM)),
            ("invokestatic", b.pool.methodref(*CIPHER)),
            ("pop",),
            ("return",),
        ], lines=lines)
    elif rule_id == "broken-hash":
        b.add_method("doDigest", "()V", [
            ("ldc", b.pool.string(WEAK_HASH)),
            ("invokestatic", b.pool.methodref(*DIGEST)),
            ("pop",),
            ("return",),
        ], lines=lines)
    elif rule_id == "hardcoded-credential":
        b.add_method("connect", "()V", [
            ("ldc", b.pool.string(JDBC_URL)),
            ("ldc", b.pool.string("svc")),
            ("ldc", b.pool.string(ADMIN_PASSWORD)),
            ("invokestatic", b.pool.methodref(*GET_CONNECTION)),
            ("pop",),
            ("return",),
        ], lines=lines)
    elif rule_id == "cleartext-url":
        b.add_method("fetch", "()V", [
            ("new", b.pool.klass(URL_INIT[0])),
            ("dup",),
            ("ldc", b.pool.string(CLEARTEXT_URL)),
            ("invokespecial", b.pool.methodref(*URL_INIT)),
            ("pop",),
            ("return",),
        ], lines=lines)
    elif rule_id == "predictable-seed":
        b.add_method("makeRandom", "()V", [
            ("new", b.pool.klass(RANDOM_INIT[0])),
            ("dup",),
            ("ldc2_w", b.pool.long_(SEED_VALUE)),
            ("invokespecial", b.pool.methodref(*RANDOM_INIT)),
            ("pop",),
            ("return",),
        ], lines=lines)
    elif rule_id == "hardcoded-key":
        b.add_method("makeKey", "()V", [
            ("new", b.pool.klass(SECRET_KEY_SPEC[0])),
            ("dup",),
            *_fill_array(KEY_BYTES, T_BYTE),
            ("ldc", b.pool.string("AES")),
            ("invokespecial", b.pool.methodref(*SECRET_KEY_SPEC)),
            ("pop",),
            ("return",),
        ], lines=lines, max_stack=16)
    elif rule_id == "constant-iv":
        b.add_method("makeIv", "()V", [
            ("new", b.pool.klass(IV_SPEC[0])),
            ("dup",),
            *_fill_array(IV_BYTES, T_BYTE),
            ("invokespecial", b.pool.methodref(*IV_SPEC)),
            ("pop",),
            ("return",),
        ], lines=lines, max_stack=16)
    elif rule_id == "constant-salt":
        b.add_method("makeParams", "()V", [
            ("new", b.pool.klass(PBE_PARAM_SPEC[0])),
            ("dup",),
            *_fill_array(SALT_BYTES, T_BYTE),
            ("sipush", 1000),
            ("invokespecial", b.pool.methodref(*PBE_PARAM_SPEC)),
            ("pop",),
            ("return",),
        ], lines=lines, max_stack=16)
    else:
        raise ValueError(f"no misuse template for rule {rule_id!r}")
    return b.build()


def build_clean_twin(rule_id: str, internal_name: str) -> bytes:
    """Same call shape as the misuse class, constants replaced by
    method parameters (runtime values)."""
    b = ClassBuilder(internal_name)

    if rule_id == "ecb-mode":
        b.add_method("doCipher", "(Ljava/lang/String;)V", [
            ("aload_0",),
            ("invokestatic", b.pool.methodref(*CIPHER)),
            ("pop",),
            ("return",),
        ])
    elif rule_id == "broken-hash":
        b.add_method("doDigest", "(Ljava/lang/String;)V", [
            ("aload_0",),
            ("invokestatic", b.pool.methodref(*DIGEST)),
            ("pop",),
            ("return",),
        ])
    elif rule_id == "hardcoded-credential":
        b.add_method("connect",
                     "(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;)V", [
            ("aload_0",),
            ("aload_1",),
            ("aload_2",),
            ("invokestatic", b.pool.methodref(*GET_CONNECTION)),
            ("pop",),
            ("return",),
        ])
    elif rule_id == "cleartext-url":
        b.add_method("fetch", "(Ljava/lang/String;)V", [
            ("new", b.pool.klass(URL_INIT[0])),
            ("dup",),
            ("aload_0",),
            ("invokespecial", b.pool.methodref(*URL_INIT)),
            ("pop",),
            ("return",),
        ])
    elif rule_id == "predictable-seed":
        b.add_method("makeRandom", "(J)V", [
            ("new", b.pool.klass(RANDOM_INIT[0])),
            ("dup",),
            ("lload_0",),
            ("invokespecial", b.pool.methodref(*RANDOM_INIT)),
            ("pop",),
            ("return",),
        ])
    elif rule_id == "hardcoded-key":
        b.add_method("makeKey", "([B)V", [
            ("new", b.pool.klass(SECRET_KEY_SPEC[0])),
            ("dup",),
            ("aload_0",),
            ("ldc", b.pool.string("AES")),
            ("invokespecial", b.pool.methodref(*SECRET_KEY_SPEC)),
            ("pop",),
            ("return",),
        ])
    elif rule_id == "constant-iv":
        b.add_method("makeIv", "([B)V", [
            ("new", b.pool.klass(IV_SPEC[0])),
            ("dup",),
            ("aload_0",),
            ("invokespecial", b.pool.methodref(*IV_SPEC)),
            ("pop",),
            ("return",),
        ])
    elif rule_id == "constant-salt":
        b.add_method("makeParams", "([B)V", [
            ("new", b.pool.klass(PBE_PARAM_SPEC[0])),
            ("dup",),
            ("aload_0",),
            ("sipush", 1000),
            ("invokespecial", b.pool.methodref(*PBE_PARAM_SPEC)),
            ("pop",),
            ("return",),
        ])
    else:
        raise ValueError(f"no clean template for rule {rule_id!r}")
    return b.build()


ALL_RULE_IDS = (
    "broken-hash", "cleartext-url", "constant-iv", "constant-salt",
    "ecb-mode", "hardcoded-credential", "hardcoded-key", "predictable-seed",
)


def seeded_corpus(with_lines: bool = True) -> list[tuple[str, bytes]]:
    """(fqn, class bytes) with exactly one misuse per shipped rule.

    Half the classes carry line tables, half do not, so optional
    source-line handling is exercised both ways.
    """
    out = []
    for i, rule_id in enumerate(ALL_RULE_IDS):
        name = f"seeded/{_camel(rule_id)}Case"
        out.append((name.replace("/", "."),
                    build_misuse_class(rule_id, name,
                                       with_lines=with_lines and i % 2 == 0)))
    return out


def clean_corpus() -> list[tuple[str, bytes]]:
    out = []
    for rule_id in ALL_RULE_IDS:
        name = f"clean/{_camel(rule_id)}Case"
        out.append((name.replace("/", "."), build_clean_twin(rule_id, name)))
    return out


def _camel(rule_id: str) -> str:
    return "".join(part.capitalize() for part in rule_id.split("-"))


def write_corpus_dir(directory, corpus):
    """Write (fqn, bytes) pairs as loose .class files; returns the paths."""
    paths = []
    for fqn, data in corpus:
        path = directory / (fqn.rsplit(".", 1)[-1] + ".class")
        path.write_bytes(data)
        paths.append(path)
    return paths


def write_corpus_archive(path, corpus):
    with zipfile.ZipFile(path, "w") as zf:
        for fqn, data in corpus:
            zf.writestr(fqn.replace(".", "/") + ".class", data)
    return path


# --- name round-trip corpus -------------------------------------------------

_PACKAGES = (
    "", "alpha", "alpha.beta", "com.example", "com.example.deep.tree",
    "io.net", "org.sample.util", "a.b.c.d.e", "single", "x.y",
)


def roundtrip_corpus(count: int = 50):
    """(package, class name, source text, class bytes) with known
    package declarations; includes default-package and nested names."""
    out = []
    for i in range(count):
        package = _PACKAGES[i % len(_PACKAGES)]
        cls = f"Fixture{i}" if i % 7 else f"Fixture{i}$Inner"
        internal = (package.replace(".", "/") + "/" if package else "") + cls
        source_name = cls.split("$")[0]
        decl = f"package {package};\n" if package else ""
        comment = "/* generated fixture */\n" if i % 3 == 0 else "// fixture\n"
        source = f"{comment}{decl}public class {source_name} {{}}\n"
        builder = ClassBuilder(internal)
        builder.add_method("id", "(I)I", [("iload_0",), ("ireturn",)])
        out.append((package, cls, source, builder.build()))
    return out


# --- interprocedural and field fixtures ------------------------------------

def wrapper_chain_class(internal_name: str, hops: int) -> bytes:
    """entry() -> hop1(t) -> ... -> hopN(t) -> Cipher.getInstance(t).

    The constant enters at entry(); resolving it from the innermost
    call site needs exactly `hops` caller hops.
    """
    b = ClassBuilder(internal_name)
    cipher = b.pool.methodref(*CIPHER)
    inner = f"hop{hops}"
    b.add_method(inner, "(Ljava/lang/String;)V", [
        ("aload_0",),
        ("invokestatic", cipher),
        ("pop",),
        ("return",),
    ])
    for level in range(hops - 1, 0, -1):
        callee = b.pool.methodref(internal_name, f"hop{level + 1}",
                                  "(Ljava/lang/String;)V")
        b.add_method(f"hop{level}", "(Ljava/lang/String;)V", [
            ("aload_0",),
            ("invokestatic", callee),
            ("return",),
        ])
    first = b.pool.methodref(internal_name, "hop1", "(Ljava/lang/String;)V")
    b.add_method("entry", "()V", [
        ("ldc", b.pool.string(ECB_TRANSFORM)),
        ("invokestatic", first),
        ("return",),
    ])
    return b.build()


def field_constant_class(internal_name: str) -> bytes:
    """Static final String with a ConstantValue attribute, used as the
    cipher transform."""
    b = ClassBuilder(internal_name)
    const = b.pool.string(ECB_TRANSFORM)
    b.add_field("TRANSFORM", "Ljava/lang/String;", constant_index=const)
    b.add_method("doCipher", "()V", [
        ("getstatic", b.pool.fieldref(internal_name, "TRANSFORM", "Ljava/lang/String;")),
        ("invokestatic", b.pool.methodref(*CIPHER)),
        ("pop",),
        ("return",),
    ])
    return b.build()


def clinit_array_field_class(internal_name: str) -> bytes:
    """Static final byte[] assigned in <clinit>, used as key material."""
    b = ClassBuilder(internal_name)
    b.add_field("KEY", "[B")
    key_ref = b.pool.fieldref(internal_name, "KEY", "[B")
    b.add_method("<clinit>", "()V", [
        *_fill_array(KEY_BYTES, T_BYTE),
        ("putstatic", key_ref),
        ("return",),
    ], access=ACC_STATIC, max_stack=8)
    b.add_method("makeKey", "()V", [
        ("new", b.pool.klass(SECRET_KEY_SPEC[0])),
        ("dup",),
        ("getstatic", key_ref),
        ("ldc", b.pool.string("AES")),
        ("invokespecial", b.pool.methodref(*SECRET_KEY_SPEC)),
        ("pop",),
        ("return",),
    ])
    return b.build()


def branch_merge_class(internal_name: str, same_constant: bool) -> bytes:
    """Two-armed branch stores a digest name into one local, then calls
    the digest factory with it."""
    b = ClassBuilder(internal_name)
    first = b.pool.string(WEAK_HASH)
    second = b.pool.string(WEAK_HASH if same_constant else "SHA-256")
    digest = b.pool.methodref(*DIGEST)
    b.add_method("pick", "(Z)V", [
        ("iload_0",),
        ("ifeq", "other"),
        ("ldc", first),
        ("astore_1",),
        ("goto", "use"),
        ("label", "other"),
        ("ldc", second),
        ("astore_1",),
        ("label", "use"),
        ("aload_1",),
        ("invokestatic", digest),
        ("pop",),
        ("return",),
    ])
    return b.build()


def env_value_class(internal_name: str) -> bytes:
    """Watched argument produced by a runtime call (environment read)."""
    b = ClassBuilder(internal_name)
    getenv = b.pool.methodref("java/lang/System", "getenv",
                              "(Ljava/lang/String;)Ljava/lang/String;")
    b.add_method("doCipher", "()V", [
        ("ldc", b.pool.string("TRANSFORM")),
        ("invokestatic", getenv),
        ("invokestatic", b.pool.methodref(*CIPHER)),
        ("pop",),
        ("return",),
    ])
    return b.build()


def local_copy_class(internal_name: str) -> bytes:
    """Constant flows through a chain of local stores and loads."""
    b = ClassBuilder(internal_name)
    b.add_method("doCipher", "()V", [
        ("ldc", b.pool.string(ECB_TRANSFORM)),
        ("astore_0",),
        ("aload_0",),
        ("astore_1",),
        ("aload_1",),
        ("invokestatic", b.pool.methodref(*CIPHER)),
        ("pop",),
        ("return",),
    ])
    return b.build()


def two_calls_class(internal_name: str) -> bytes:
    """Two calls to the same catalogued target in one method."""
    b = ClassBuilder(internal_name)
    cipher = b.pool.methodref(*CIPHER)
    b.add_method("twice", "()V", [
        ("ldc", b.pool.string(ECB_TRANSFORM)),
        ("invokestatic", cipher),
        ("pop",),
        ("ldc", b.pool.string("AES/GCM/NoPadding")),
        ("invokestatic", cipher),
        ("pop",),
        ("return",),
    ])
    return b.build()


def unrelated_class(internal_name: str) -> bytes:
    """No catalogued calls at all; must never be IR-built."""
    b = ClassBuilder(internal_name)
    b.add_method("work", "(II)I", [
        ("iload_0",),
        ("iload_1",),
        ("iadd",),
        ("ireturn",),
    ])
    b.add_method("helper", "()V", [("return",)])
    return b.build()


def stall_archive(path, class_count: int, methods_per_class: int = 12):
    """Large synthetic archive; each class plants catalogued calls so a
    full scan is expensive."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for n in range(class_count):
            internal = f"stall/p{n % 97}/Cls{n}"
            b = ClassBuilder(internal)
            cipher = b.pool.methodref(*CIPHER)
            transform = b.pool.string(ECB_TRANSFORM)
            for m in range(methods_per_class):
                b.add_method(f"m{m}", "()V", [
                    ("ldc", transform),
                    ("invokestatic", cipher),
                    ("pop",),
                    ("return",),
                ])
            zf.writestr(internal + ".class", b.build())
    return path
