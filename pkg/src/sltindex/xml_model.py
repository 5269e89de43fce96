"""XML structure trees.

An XML document is split into a *structure tree* holding only markup
shape and a *text collection* holding the character data.  Attribute
values and text nodes are replaced by placeholder leaves so that the
tree can be compressed independently of the (usually incompressible)
text.  The i-th placeholder in pre-order owns the i-th string of the
collection, so `get_text` is just an array lookup.

Reserved labels:

  _T    text placeholder (one entry in the text collection)
  _A    attribute container, always the first child of its element
  _AT   attribute value placeholder (one entry in the text collection)
  @x    attribute named x; its single child is an _AT leaf
"""

from __future__ import annotations

import re
from typing import Callable, Iterable, Optional

TEXT_LABEL = "_T"
ATTR_CONTAINER_LABEL = "_A"
ATTR_VALUE_LABEL = "_AT"

TEXT = 0
ATTR_CONTAINER = 1
ATTR_VALUE = 2

_N_RESERVED = 3


class MalformedXml(Exception):
    """Input is not well-formed under the supported dialect."""


class UnsupportedConstruct(Exception):
    """Well-formed XML using a feature outside the supported dialect."""


class IndexOutOfRange(IndexError):
    """A node or text index outside the addressed collection."""


class SinkFailure(Exception):
    """An output sink refused data mid-serialization."""


class LabelTable:
    """Bidirectional mapping between label strings and dense ids.

    Ids 0..2 are reserved for _T, _A and _AT.  Attribute labels keep
    their leading '@'.
    """

    def __init__(self) -> None:
        self.names: list[str] = [TEXT_LABEL, ATTR_CONTAINER_LABEL, ATTR_VALUE_LABEL]
        self._ids: dict[str, int] = {n: i for i, n in enumerate(self.names)}

    def intern(self, name: str) -> int:
        i = self._ids.get(name)
        if i is None:
            i = len(self.names)
            self.names.append(name)
            self._ids[name] = i
        return i

    def lookup(self, name: str) -> Optional[int]:
        return self._ids.get(name)

    def name(self, label_id: int) -> str:
        if not 0 <= label_id < len(self.names):
            raise IndexOutOfRange(f"label id {label_id}")
        return self.names[label_id]

    def __len__(self) -> int:
        return len(self.names)

    def is_element(self, label_id: int) -> bool:
        """True for real element labels: not reserved, not an attribute."""
        return label_id >= _N_RESERVED and not self.names[label_id].startswith("@")


class TextCollection:
    """The document's strings, addressed by placeholder pre-order rank."""

    def __init__(self, texts: Optional[list[str]] = None) -> None:
        self._texts: list[str] = texts if texts is not None else []

    def append(self, s: str) -> int:
        self._texts.append(s)
        return len(self._texts) - 1

    def get_text(self, i: int) -> str:
        if not 0 <= i < len(self._texts):
            raise IndexOutOfRange(f"text index {i} of {len(self._texts)}")
        return self._texts[i]

    def __len__(self) -> int:
        return len(self._texts)

    def __iter__(self):
        return iter(self._texts)


class StructureTree:
    """Ordered labeled tree in parallel arrays, nodes in pre-order.

    first_child / next_sibling / parent use -1 for "none".  The root is
    node 0.
    """

    def __init__(self) -> None:
        self.label: list[int] = []
        self.first_child: list[int] = []
        self.next_sibling: list[int] = []
        self.parent: list[int] = []

    def __len__(self) -> int:
        return len(self.label)

    def add_node(self, label: int, parent: int, prev_sibling: int) -> int:
        """Append a node in pre-order; returns its id."""
        i = len(self.label)
        self.label.append(label)
        self.first_child.append(-1)
        self.next_sibling.append(-1)
        self.parent.append(parent)
        if prev_sibling >= 0:
            self.next_sibling[prev_sibling] = i
        elif parent >= 0:
            self.first_child[parent] = i
        return i

    def children(self, i: int) -> Iterable[int]:
        c = self.first_child[i]
        while c >= 0:
            yield c
            c = self.next_sibling[c]


# Tokenizer.  Tags are matched quote-aware so '>' inside attribute
# values does not end the tag.  Comments and processing instructions
# are recognized so they can be skipped; stray markup fails to match
# and is reported at its offset.
_TOKEN_RE = re.compile(
    rb"<!--.*?-->"
    rb"|<\?.*?\?>"
    rb"|<!\[CDATA\[.*?\]\]>"
    rb"|<!(?:[^>\"']|\"[^\"]*\"|'[^']*')*>"
    rb"|<(?:[^>\"']|\"[^\"]*\"|'[^']*')*>",
    re.DOTALL,
)

_NAME_RE = re.compile(rb"[^\s=/>\"']+")

_ENTITY_RE = re.compile(rb"&(#?[A-Za-z0-9]+);|&")

_PREDEF = {b"lt": b"<", b"gt": b">", b"amp": b"&", b"apos": b"'", b"quot": b'"'}


def _expand_entities(data: bytes, at: int) -> bytes:
    out = []
    pos = 0
    for m in _ENTITY_RE.finditer(data):
        out.append(data[pos : m.start()])
        pos = m.end()
        ref = m.group(1)
        if ref is None:
            raise MalformedXml(f"bare '&' at offset {at + m.start()}")
        rep = _PREDEF.get(ref)
        if rep is None:
            raise UnsupportedConstruct(
                f"entity reference &{ref.decode('ascii', 'replace')}; at offset {at + m.start()}"
            )
        out.append(rep)
    out.append(data[pos:])
    return b"".join(out)


def _parse_tag(body: bytes, at: int):
    """Split the inside of a start tag into (name, [(attr, value)...], selfclose)."""
    selfclose = body.endswith(b"/")
    if selfclose:
        body = body[:-1]
    m = _NAME_RE.match(body)
    if m is None:
        raise MalformedXml(f"missing tag name at offset {at}")
    name = m.group(0)
    attrs = []
    seen = set()
    pos = m.end()
    n = len(body)
    while True:
        while pos < n and body[pos] in b" \t\r\n":
            pos += 1
        if pos >= n:
            break
        m = _NAME_RE.match(body, pos)
        if m is None:
            raise MalformedXml(f"bad attribute syntax at offset {at + pos}")
        aname = m.group(0)
        pos = m.end()
        while pos < n and body[pos] in b" \t\r\n":
            pos += 1
        if pos >= n or body[pos] != ord("="):
            raise MalformedXml(f"attribute without value at offset {at + pos}")
        pos += 1
        while pos < n and body[pos] in b" \t\r\n":
            pos += 1
        if pos >= n or body[pos] not in b"\"'":
            raise MalformedXml(f"unquoted attribute value at offset {at + pos}")
        q = body[pos]
        end = body.find(bytes([q]), pos + 1)
        if end < 0:
            raise MalformedXml(f"unterminated attribute value at offset {at + pos}")
        value = body[pos + 1 : end]
        pos = end + 1
        if aname in seen:
            raise MalformedXml(
                f"duplicate attribute {aname.decode('utf-8', 'replace')} at offset {at}"
            )
        seen.add(aname)
        attrs.append((aname, value))
    return name, attrs, selfclose


def parse_document(data: bytes, labels: Optional[LabelTable] = None):
    """Parse one XML document into (StructureTree, TextCollection, LabelTable).

    Supported dialect: elements, attributes, character data, predefined
    entities.  The XML declaration, processing instructions and comments
    are skipped.  DOCTYPE, CDATA and non-predefined entity references
    (including numeric ones) raise UnsupportedConstruct.
    """
    if labels is None:
        labels = LabelTable()
    st = StructureTree()
    texts = TextCollection()

    # (node id, last child id so far) per open element
    stack: list[list[int]] = []
    root_seen = False
    pos = 0
    n = len(data)

    def add_text(raw: bytes, at: int) -> None:
        if not stack:
            if raw.strip():
                raise MalformedXml(f"character data outside root at offset {at}")
            return
        s = _expand_entities(raw, at).decode("utf-8")
        top = stack[-1]
        node = st.add_node(TEXT, top[0], top[1])
        top[1] = node
        texts.append(s)

    while pos < n:
        lt = data.find(b"<", pos)
        if lt < 0:
            add_text(data[pos:], pos)
            break
        if lt > pos:
            add_text(data[pos:lt], pos)
        m = _TOKEN_RE.match(data, lt)
        if m is None:
            raise MalformedXml(f"unterminated markup at offset {lt}")
        tok = m.group(0)
        pos = m.end()
        if tok.startswith(b"<!--") or tok.startswith(b"<?"):
            continue
        if tok.startswith(b"<!["):
            raise UnsupportedConstruct(f"CDATA section at offset {lt}")
        if tok.startswith(b"<!"):
            raise UnsupportedConstruct(f"DOCTYPE or markup declaration at offset {lt}")
        body = tok[1:-1]
        if body.startswith(b"/"):
            name = body[1:].strip()
            if not stack:
                raise MalformedXml(f"close tag without open element at offset {lt}")
            node = stack.pop()[0]
            expect = labels.name(st.label[node]).encode("utf-8")
            if name != expect:
                raise MalformedXml(
                    f"mismatched close tag </{name.decode('utf-8', 'replace')}> "
                    f"at offset {lt}, expected </{expect.decode('utf-8', 'replace')}>"
                )
            continue
        name, attrs, selfclose = _parse_tag(body, lt)
        if stack:
            top = stack[-1]
            parent, prev = top[0], top[1]
        else:
            if root_seen:
                raise MalformedXml(f"second root element at offset {lt}")
            root_seen = True
            parent, prev = -1, -1
        node = st.add_node(labels.intern(name.decode("utf-8")), parent, prev)
        if stack:
            stack[-1][1] = node
        if attrs:
            cont = st.add_node(ATTR_CONTAINER, node, -1)
            aprev = -1
            for aname, avalue in attrs:
                a = st.add_node(labels.intern("@" + aname.decode("utf-8")), cont, aprev)
                st.add_node(ATTR_VALUE, a, -1)
                texts.append(_expand_entities(avalue, lt).decode("utf-8"))
                aprev = a
        if not selfclose:
            last = st.first_child[node] if attrs else -1
            stack.append([node, last])

    if stack:
        top = labels.name(st.label[stack[-1][0]])
        raise MalformedXml(f"unclosed element <{top}> at end of input")
    if not root_seen:
        raise MalformedXml("no root element")
    return st, texts, labels


def escape_text(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def escape_attr(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace('"', "&quot;")


class XmlWriter:
    """Streams structure events back out as XML text.

    The writer owns the little state machine that turns the _A/@x/_AT
    placeholder convention back into attribute syntax: after an element
    opens, its tag is held pending until we know whether an attribute
    container follows.
    """

    def __init__(self, sink: Callable[[str], object]) -> None:
        self._sink = sink
        self._tag: list[str] = []  # buffered start tag, "<name" then " k=\"v\"" parts
        self._attr: Optional[str] = None  # attribute name being written
        self._in_attrs = False

    def _emit(self, s: str) -> None:
        try:
            self._sink(s)
        except Exception as e:  # pragma: no cover - sink-specific
            raise SinkFailure(str(e)) from e

    def _flush_tag(self) -> None:
        if self._tag:
            self._emit("".join(self._tag) + ">")
            self._tag.clear()

    def open(self, name: str) -> None:
        if name == ATTR_CONTAINER_LABEL:
            self._in_attrs = True
            return
        if self._in_attrs:
            if name.startswith("@"):
                self._attr = name[1:]
                return
            raise MalformedXml(f"unexpected {name} inside attribute container")
        self._flush_tag()
        self._tag.append(f"<{name}")

    def close(self, name: str) -> None:
        if name == ATTR_CONTAINER_LABEL:
            self._in_attrs = False
            return
        if name.startswith("@"):
            self._attr = None
            return
        self._flush_tag()
        self._emit(f"</{name}>")

    def text(self, s: str) -> None:
        """Character data (_T) or attribute value (_AT)."""
        if self._attr is not None:
            self._tag.append(f' {self._attr}="{escape_attr(s)}"')
        else:
            self._flush_tag()
            self._emit(escape_text(s))

    def finish(self) -> None:
        self._flush_tag()


def emit_xml(
    st: StructureTree,
    texts: TextCollection,
    labels: LabelTable,
    sink: Callable[[str], object],
    root: int = 0,
) -> None:
    """Serialize the subtree at `root` back to XML text."""
    w = XmlWriter(sink)
    names = labels.names
    # pre-order text counter: placeholders before `root`
    counter = 0
    for i in range(root):
        if st.label[i] == TEXT or st.label[i] == ATTR_VALUE:
            counter += 1
    stack: list[tuple[int, bool]] = [(root, False)]
    while stack:
        node, closing = stack.pop()
        lab = st.label[node]
        if closing:
            w.close(names[lab])
            continue
        if lab == TEXT or lab == ATTR_VALUE:
            w.text(texts.get_text(counter))
            counter += 1
            continue
        w.open(names[lab])
        stack.append((node, True))
        kids = list(st.children(node))
        for c in reversed(kids):
            stack.append((c, False))
    w.finish()


def document_to_string(st: StructureTree, texts: TextCollection, labels: LabelTable) -> str:
    parts: list[str] = []
    emit_xml(st, texts, labels, parts.append)
    return "".join(parts)
