"""NMEA 0183 AIVDM/AIVDO decoding for class-A AIS traffic.

Covers checksum verification, 6-bit payload de-armoring, multi-sentence
reassembly, and bit-level field extraction for message types 1-3 (position
reports) and type 5 (static and voyage data). Other message types are
counted and skipped. Receiver-assigned timestamps are attached at decode
time; the AIS payload itself only carries a seconds-of-minute field.

Field offsets follow the standard ITU-R M.1371 layout as documented in the
public AIVDM/AIVDO protocol notes:

    types 1/2/3 (168 bits)        type 5 (424 bits)
      0   6  message type           0   6  message type
      8  30  MMSI                   8  30  MMSI
     38   4  navigational status   40  30  IMO number
     42   8  rate of turn          70  42  call sign (7 ch)
     50  10  SOG, 1/10 kn         112 120  vessel name (20 ch)
     61  28  longitude, 1e-4 min  232   8  ship type
     89  27  latitude,  1e-4 min  240  30  dimensions (A/B/C/D)
    116  12  COG, 1/10 deg
    128   9  true heading
    137   6  UTC second
"""

import datetime as dt
import functools
import operator
import re
from dataclasses import dataclass, field
from enum import IntEnum


class BadChecksum(ValueError):
    """Computed XOR checksum does not match the declared one."""


class Malformed(ValueError):
    """Line does not follow the expected NMEA structure."""


class MissingFragment(ValueError):
    """A multi-sentence group is incomplete."""


class DuplicateFragment(ValueError):
    """A fragment index appears twice in one group."""


class FragmentTimeout(ValueError):
    """A multi-sentence group was not completed within the window."""


class WrongType(ValueError):
    """Buffer holds a different message type than the decoder expects."""


class TruncatedBuffer(ValueError):
    """Buffer is too short for the message type's mandatory fields."""


class OutOfRangePosition(ValueError):
    """Decoded latitude/longitude falls outside the valid range."""


# 6-bit armoring alphabet: values 0-39 map to ASCII 48-87, 40-63 to 96-119.
ARMOR_ALPHABET = "".join(chr(v + 48) if v < 40 else chr(v + 56) for v in range(64))
_CHAR_VALUE = {c: v for v, c in enumerate(ARMOR_ALPHABET)}
# str.translate table turning a payload into its binary expansion in one pass
_BIT_TABLE = {ord(c): format(v, "06b") for v, c in enumerate(ARMOR_ALPHABET)}
# deletes every armoring character; whatever survives is invalid
_ARMOR_DELETE = {ord(c): None for c in ARMOR_ALPHABET}

UTC = dt.timezone.utc


class NavStatus(IntEnum):
    """AIS navigational status codes. This toolkit acts on 0, 1 and 5."""

    UNDERWAY_ENGINE = 0
    AT_ANCHOR = 1
    NOT_UNDER_COMMAND = 2
    RESTRICTED_MANEUVERABILITY = 3
    CONSTRAINED_BY_DRAUGHT = 4
    MOORED = 5
    AGROUND = 6
    FISHING = 7
    UNDERWAY_SAILING = 8
    RESERVED_9 = 9
    RESERVED_10 = 10
    RESERVED_11 = 11
    RESERVED_12 = 12
    RESERVED_13 = 13
    AIS_SART = 14
    UNDEFINED = 15


TRACKED_STATUSES = (NavStatus.UNDERWAY_ENGINE, NavStatus.AT_ANCHOR, NavStatus.MOORED)


@dataclass(frozen=True)
class RawSentence:
    """One parsed AIVDM/AIVDO sentence, checksum already verified."""

    talker: str
    fragment_count: int
    fragment_index: int
    message_id: int | None
    channel: str
    payload: str
    fill_bits: int
    checksum: int


@dataclass(slots=True)
class PositionReport:
    """One decoded dynamic position report (types 1-3)."""

    mmsi: int
    timestamp: dt.datetime
    lat: float
    lon: float
    sog: float | None
    cog: float | None
    heading: float | None
    navstat: int
    rot: int | None


@dataclass(slots=True)
class StaticReport:
    """Decoded static/voyage data (type 5): identity and vessel type."""

    mmsi: int
    vessel_name: str
    ship_type: int
    length: int | None = None
    width: int | None = None
    timestamp: dt.datetime | None = None


class Bits:
    """Fixed-width big-endian bit buffer backed by a single Python int."""

    __slots__ = ("value", "nbits")

    def __init__(self, value: int, nbits: int):
        self.value = value
        self.nbits = nbits

    def __len__(self) -> int:
        return self.nbits

    def __eq__(self, other) -> bool:
        return isinstance(other, Bits) and self.value == other.value and self.nbits == other.nbits

    def uint(self, start: int, width: int) -> int:
        """Unsigned field of `width` bits starting at bit offset `start`."""
        if start + width > self.nbits:
            raise TruncatedBuffer(f"field [{start}:{start + width}) beyond {self.nbits} bits")
        return (self.value >> (self.nbits - start - width)) & ((1 << width) - 1)

    def sint(self, start: int, width: int) -> int:
        """Two's-complement signed field."""
        raw = self.uint(start, width)
        if raw & (1 << (width - 1)):
            raw -= 1 << width
        return raw


def nmea_checksum(body: str) -> int:
    """XOR of all characters between the leading '!'/'$' and the '*'."""
    return functools.reduce(operator.xor, body.encode("ascii"), 0)


def _parse_fields(line: str) -> tuple:
    """Checksum-verified field split; the tuple matches RawSentence order."""
    if not line:
        raise Malformed("empty line")
    if line[0] not in "!$":
        line = line.strip()
        if not line:
            raise Malformed("empty line")
        if line[0] not in "!$":
            raise Malformed("line does not start with '!' or '$'")
    elif line[-1] in " \t\r\n":
        line = line.strip()
    star = line.rfind("*")
    if star == -1 or len(line) - star != 3:
        raise Malformed("missing or short checksum field")
    body = line[1:star]
    try:
        declared = int(line[star + 1 :], 16)
    except ValueError:
        raise Malformed(f"checksum {line[star + 1:]!r} is not hex") from None
    try:
        computed = nmea_checksum(body)
    except UnicodeEncodeError:
        raise Malformed("non-ASCII characters in sentence") from None
    if computed != declared:
        raise BadChecksum(f"computed {computed:02X}, declared {declared:02X}")
    fields = body.split(",")
    if len(fields) != 7:
        raise Malformed(f"expected 7 comma-separated fields, got {len(fields)}")
    talker, frag_count_s, frag_index_s, msg_id_s, channel, payload, fill_s = fields
    try:
        fragment_count = int(frag_count_s)
        fragment_index = int(frag_index_s)
        fill_bits = int(fill_s)
    except ValueError:
        raise Malformed("non-integer fragment/fill field") from None
    if fragment_count < 1 or fragment_index < 1:
        raise Malformed("fragment numbers must be >= 1")
    if fragment_index > fragment_count:
        raise Malformed(f"fragment index {fragment_index} > count {fragment_count}")
    if not 0 <= fill_bits <= 5:
        raise Malformed(f"fill bits {fill_bits} outside 0..5")
    message_id = None
    if msg_id_s:
        try:
            message_id = int(msg_id_s)
        except ValueError:
            raise Malformed(f"message id {msg_id_s!r} is not an integer") from None
    if fragment_count > 1 and message_id is None:
        raise Malformed("multi-sentence group without a message id")
    if not payload:
        raise Malformed("empty payload")
    bad = payload.translate(_ARMOR_DELETE)
    if bad:
        raise Malformed(f"payload character {bad[0]!r} outside the armoring alphabet")
    return (talker, fragment_count, fragment_index, message_id, channel, payload, fill_bits, declared)


def parse_sentence(line: str) -> RawSentence:
    """Split one NMEA line into its AIVDM fields and verify the checksum."""
    return RawSentence(*_parse_fields(line))


def payload_to_bits(payload: str, fill_bits: int) -> Bits:
    """De-armor a payload string into a bit buffer, dropping fill bits."""
    try:
        bitstr = payload.translate(_BIT_TABLE)
        value = int(bitstr, 2)
    except ValueError:
        raise Malformed("payload contains characters outside the armoring alphabet") from None
    nbits = 6 * len(payload) - fill_bits
    if nbits <= 0:
        raise Malformed("payload shorter than its fill bits")
    return Bits(value >> fill_bits, nbits)


def assemble_fragments(sentences) -> Bits:
    """Join the payloads of one multi-sentence group into a bit buffer.

    The sentences must share channel and message id; every fragment index
    1..fragment_count must be present exactly once.
    """
    sentences = list(sentences)
    if not sentences:
        raise MissingFragment("no fragments")
    total = sentences[0].fragment_count
    key = (sentences[0].channel, sentences[0].message_id)
    by_index: dict[int, RawSentence] = {}
    for s in sentences:
        if s.fragment_count != total or (s.channel, s.message_id) != key:
            raise Malformed("fragments from different groups")
        if s.fragment_index in by_index:
            raise DuplicateFragment(f"fragment {s.fragment_index}/{total} repeated")
        by_index[s.fragment_index] = s
    missing = [i for i in range(1, total + 1) if i not in by_index]
    if missing:
        raise MissingFragment(f"missing fragments {missing} of {total}")
    payload = "".join(by_index[i].payload for i in range(1, total + 1))
    return payload_to_bits(payload, by_index[total].fill_bits)


def decode_position(bits: Bits, rx_time: dt.datetime) -> PositionReport:
    """Decode a class-A position report (types 1-3) from a bit buffer.

    Latitude/longitude arrive as two's-complement 1/10000-minute integers;
    the "position unavailable" sentinels (91/181 degrees) fail the range
    check and reject the message. Field extraction is inlined shift/mask
    arithmetic: this sits on the ingest hot path.
    """
    n = bits.nbits
    if n < 6:
        raise TruncatedBuffer("buffer shorter than the type field")
    v = bits.value
    mtype = v >> (n - 6)
    if mtype not in (1, 2, 3):
        raise WrongType(f"expected a type 1/2/3 position report, got type {mtype}")
    if n < 168:
        raise TruncatedBuffer(f"position report needs 168 bits, got {n}")
    lat_raw = (v >> (n - 116)) & 0x7FFFFFF  # [89:116)
    if lat_raw >= 0x4000000:
        lat_raw -= 0x8000000
    lon_raw = (v >> (n - 89)) & 0xFFFFFFF  # [61:89)
    if lon_raw >= 0x8000000:
        lon_raw -= 0x10000000
    lat = lat_raw / 600000.0
    lon = lon_raw / 600000.0
    if abs(lat) > 90.0 or abs(lon) > 180.0:
        raise OutOfRangePosition(f"lat={lat:.5f} lon={lon:.5f}")
    sog_raw = (v >> (n - 60)) & 0x3FF  # [50:60)
    cog_raw = (v >> (n - 128)) & 0xFFF  # [116:128)
    hdg_raw = (v >> (n - 137)) & 0x1FF  # [128:137)
    rot_raw = (v >> (n - 50)) & 0xFF  # [42:50)
    if rot_raw >= 128:
        rot_raw -= 256
    return PositionReport(  # positional: field order as declared
        (v >> (n - 38)) & 0x3FFFFFFF,
        rx_time,
        lat,
        lon,
        None if sog_raw == 1023 else sog_raw / 10.0,
        None if cog_raw >= 3600 else cog_raw / 10.0,
        None if hdg_raw > 359 else float(hdg_raw),
        (v >> (n - 42)) & 0xF,
        None if rot_raw == -128 else rot_raw,
    )


def _sixbit_text(bits: Bits, start: int, nchars: int) -> str:
    chars = []
    for i in range(nchars):
        v = bits.uint(start + 6 * i, 6)
        chars.append(chr(v + 64) if v < 32 else chr(v))
    return "".join(chars).rstrip("@ ")


def decode_static(bits: Bits, rx_time: dt.datetime | None = None) -> StaticReport:
    """Decode static/voyage data (type 5): name, ship type, dimensions."""
    if bits.nbits < 6:
        raise TruncatedBuffer("buffer shorter than the type field")
    mtype = bits.uint(0, 6)
    if mtype != 5:
        raise WrongType(f"expected a type 5 static report, got type {mtype}")
    if bits.nbits < 240:
        # name ends at bit 232, ship type at 240; dimensions are optional
        raise TruncatedBuffer(f"static report needs at least 240 bits, got {bits.nbits}")
    ship_type = bits.uint(232, 8)
    if ship_type > 99:
        ship_type = 0  # reserved codes treated as "not available"
    length = width = None
    if bits.nbits >= 270:
        to_bow = bits.uint(240, 9)
        to_stern = bits.uint(249, 9)
        to_port = bits.uint(258, 6)
        to_starboard = bits.uint(264, 6)
        if to_bow or to_stern:
            length = to_bow + to_stern
        if to_port or to_starboard:
            width = to_port + to_starboard
    return StaticReport(
        mmsi=bits.uint(8, 30),
        vessel_name=_sixbit_text(bits, 112, 20),
        ship_type=ship_type,
        length=length,
        width=width,
        timestamp=rx_time,
    )


def split_tag_block(line: str) -> tuple[dt.datetime | None, str]:
    """Strip a leading NMEA TAG block, returning its c: timestamp if present.

    TAG blocks look like ``\\c:1567692251*5F\\!AIVDM,...``; only the ``c``
    (receive time, unix seconds or milliseconds) field is interpreted, the
    rest is passed through.
    """
    if not line.startswith("\\"):
        return None, line
    end = line.find("\\", 1)
    if end == -1:
        raise Malformed("unterminated TAG block")
    tag = line[1:end]
    rest = line[end + 1 :]
    star = tag.rfind("*")
    if star == -1 or len(tag) - star != 3:
        raise Malformed("TAG block without checksum")
    try:
        declared = int(tag[star + 1 :], 16)
    except ValueError:
        raise Malformed("TAG block checksum is not hex") from None
    body = tag[:star]
    if nmea_checksum(body) != declared:
        raise Malformed("TAG block checksum mismatch")
    rx = None
    parts = (body,) if "," not in body else body.split(",")
    for part in parts:
        if part.startswith("c:"):
            try:
                stamp = int(part[2:])
            except ValueError:
                raise Malformed(f"TAG block time {part!r} is not an integer") from None
            if stamp >= 10**12:  # milliseconds
                stamp //= 1000
            rx = dt.datetime.fromtimestamp(stamp, tz=UTC)
    return rx, rest


_ERROR_NAMES = {
    BadChecksum: "bad_checksum",
    Malformed: "malformed",
    MissingFragment: "missing_fragment",
    DuplicateFragment: "duplicate_fragment",
    FragmentTimeout: "timeout",
    WrongType: "wrong_type",
    TruncatedBuffer: "truncated_buffer",
    OutOfRangePosition: "out_of_range_position",
}

# Fast path for the overwhelmingly common line shape: a single c:-tagged,
# single-sentence AIVDM/AIVDO report. Anything else (untagged lines, other
# talkers, multi-sentence groups, corrupt lines) falls back to the general
# parser, which produces the same decode or the proper categorized error.
_FAST_LINE = re.compile(
    r"^\\(c:(\d+))\*([0-9A-Fa-f]{2})\\"
    r"!(AIVD[MO],1,1,,([AB12]?),([0-9:;<=>?@A-W`a-w]+),([0-5]))\*([0-9A-Fa-f]{2})$"
)


@dataclass(slots=True)
class DecodeOutcome:
    """What became of one input line (or of an expired fragment group).

    kind is one of "position", "static", "buffered", "skipped", "error".
    Every fed line produces exactly one outcome; timeout outcomes for
    expired fragment groups are reported in addition, attributed to the
    lines that were buffered.
    """

    kind: str
    message: PositionReport | StaticReport | None = None
    error: str | None = None
    detail: str | None = None
    raw: str | None = None


class _PendingGroup:
    __slots__ = ("first_rx", "count", "sentences", "raws")

    def __init__(self, first_rx, count):
        self.first_rx = first_rx
        self.count = count
        self.sentences: dict[int, RawSentence] = {}
        self.raws: list[str] = []


class FragmentAssembler:
    """Buffers multi-sentence groups keyed by (channel, message id).

    Groups not completed within the window are discarded; the eviction is
    reported so the stream layer can account for every buffered line.
    """

    def __init__(self, window_s: float = 30.0):
        self.window = dt.timedelta(seconds=window_s)
        self._pending: dict[tuple[str, int | None], _PendingGroup] = {}

    def expire(self, now: dt.datetime) -> list[_PendingGroup]:
        expired = [key for key, grp in self._pending.items() if now - grp.first_rx > self.window]
        return [self._pending.pop(key) for key in expired]

    def add(self, sentence: RawSentence, rx_time: dt.datetime, raw: str | None = None) -> Bits | None:
        key = (sentence.channel, sentence.message_id)
        group = self._pending.get(key)
        if group is None:
            group = self._pending[key] = _PendingGroup(rx_time, sentence.fragment_count)
        if sentence.fragment_index in group.sentences:
            raise DuplicateFragment(
                f"fragment {sentence.fragment_index}/{sentence.fragment_count} repeated for {key}"
            )
        if sentence.fragment_count != group.count:
            raise Malformed(f"fragment count changed mid-group for {key}")
        group.sentences[sentence.fragment_index] = sentence
        if raw is not None:
            group.raws.append(raw)
        if len(group.sentences) < group.count:
            return None
        del self._pending[key]
        return assemble_fragments(group.sentences.values())


class MessageDecoder:
    """Stateful line-to-message decoder with fragment reassembly.

    feed() returns one outcome per line, preceded by timeout outcomes for
    any fragment groups that expired before the line arrived. Counters
    accumulate across the decoder's lifetime. This is the ingest hot path,
    hence the inlined tag handling and positional constructors.
    """

    def __init__(self, reassembly_window_s: float = 30.0):
        self.assembler = FragmentAssembler(reassembly_window_s)
        self.lines = 0
        self.positions = 0
        self.statics = 0
        self.buffered = 0
        self.skipped = 0
        self.errors = 0

    @property
    def counts(self) -> dict:
        return {
            "lines": self.lines,
            "positions": self.positions,
            "statics": self.statics,
            "buffered": self.buffered,
            "skipped": self.skipped,
            "errors": self.errors,
        }

    def _error(self, exc: Exception, raw: str) -> DecodeOutcome:
        self.errors += 1
        return DecodeOutcome("error", None, _ERROR_NAMES.get(type(exc), "error"), str(exc), raw)

    def _timeout_outcomes(self, now: dt.datetime) -> list[DecodeOutcome]:
        outcomes = []
        for group in self.assembler.expire(now):
            self.errors += 1
            detail = f"{len(group.sentences)}/{group.count} fragments within window"
            outcomes.append(
                DecodeOutcome("error", None, "timeout", detail, group.raws[0] if group.raws else None)
            )
        return outcomes

    def feed(self, line: str, rx_time: dt.datetime) -> list[DecodeOutcome]:
        """Process one line; eviction of stale fragment groups runs on the
        same clock as the line itself (TAG-block time when present)."""
        self.lines += 1
        raw = line if (line and line[-1] not in "\r\n") else line.rstrip("\r\n")
        m = _FAST_LINE.match(raw)
        if m is not None:
            tag_body, stamp, tag_cs, body, _chan, payload, fill, cs = m.groups()
            if (
                functools.reduce(operator.xor, body.encode(), 0) == int(cs, 16)
                and functools.reduce(operator.xor, tag_body.encode(), 0) == int(tag_cs, 16)
            ):
                epoch = int(stamp)
                if epoch >= 10**12:
                    epoch //= 1000
                rx = dt.datetime.fromtimestamp(epoch, tz=UTC)
                outcomes = self._timeout_outcomes(rx) if self.assembler._pending else []
                outcomes.append(self._decode_bits(payload_to_bits(payload, int(fill)), rx, raw))
                return outcomes
            # checksum mismatch: re-run the strict parser for the right error
        rx = rx_time
        sentence_text = raw
        if raw.startswith("\\"):
            try:
                tag_time, sentence_text = split_tag_block(raw)
            except Malformed as exc:
                return [self._error(exc, raw)]
            if tag_time is not None:
                rx = tag_time
        outcomes = self._timeout_outcomes(rx) if self.assembler._pending else []
        try:
            fields = _parse_fields(sentence_text)
        except (BadChecksum, Malformed) as exc:
            outcomes.append(self._error(exc, raw))
            return outcomes
        try:
            if fields[1] == 1:  # single-sentence message: skip RawSentence
                bits = payload_to_bits(fields[5], fields[6])
            else:
                bits = self.assembler.add(RawSentence(*fields), rx, raw=raw)
                if bits is None:
                    self.buffered += 1
                    outcomes.append(DecodeOutcome("buffered", None, None, None, raw))
                    return outcomes
        except (DuplicateFragment, Malformed) as exc:
            outcomes.append(self._error(exc, raw))
            return outcomes
        outcomes.append(self._decode_bits(bits, rx, raw))
        return outcomes

    def _decode_bits(self, bits: Bits, rx: dt.datetime, raw: str) -> DecodeOutcome:
        try:
            mtype = bits.value >> (bits.nbits - 6) if bits.nbits >= 6 else -1
            if mtype in (1, 2, 3):
                msg = decode_position(bits, rx)
                self.positions += 1
                return DecodeOutcome("position", msg, None, None, raw)
            if mtype == 5:
                msg = decode_static(bits, rx)
                self.statics += 1
                return DecodeOutcome("static", msg, None, None, raw)
            self.skipped += 1
            return DecodeOutcome("skipped", None, None, f"unsupported message type {mtype}", raw)
        except (WrongType, TruncatedBuffer, OutOfRangePosition) as exc:
            return self._error(exc, raw)

    def finish(self) -> list[DecodeOutcome]:
        """Flush pending fragment groups at end of input as timeouts."""
        outcomes = []
        for group in list(self.assembler._pending.values()):
            self.errors += 1
            detail = f"{len(group.sentences)}/{group.count} fragments at end of input"
            outcomes.append(
                DecodeOutcome("error", None, "timeout", detail, group.raws[0] if group.raws else None)
            )
        self.assembler._pending.clear()
        return outcomes
