import logging
import queue
import socket
import struct
import time
from dataclasses import dataclass, replace

import numpy as np

import constants as cs
import ring_fixed as rf
import sharing

LOG = logging.getLogger(__name__)

# Frame kinds
OPEN = 1
SYNC = 2
RESULT = 3
CONTROL = 4
KINDS = (OPEN, SYNC, RESULT, CONTROL)

FRAME_HEADER = struct.Struct('<IB')  # payload length in bytes, kind
HANDSHAKE_FIELDS = ('magic', 'version', 'q', 'f', 'session id', 'config digest')


class TransportError(RuntimeError):
    """The peer went away or stopped answering. The session is over."""
    pass


class ProtocolError(ValueError):
    pass


class HandshakeError(ProtocolError):
    pass


def encode_frame(kind, values) -> bytes:
    if kind not in KINDS:
        raise ProtocolError('Unknown frame kind: {}'.format(kind))
    payload = np.ascontiguousarray(np.asarray(values, dtype=np.uint64).ravel(), dtype='<u8').tobytes()
    return FRAME_HEADER.pack(len(payload), kind) + payload


def parse_header(header: bytes):
    length, kind = FRAME_HEADER.unpack(header)
    if kind not in KINDS:
        raise ProtocolError('Unknown frame kind: {}'.format(kind))
    if length % 8:
        raise ProtocolError('Frame payload of {} bytes is not a whole number of ring elements'.format(length))
    return length, kind


def decode_frame(data: bytes):
    """Parse one complete frame. Returns (kind, uint64 array)."""
    if len(data) < FRAME_HEADER.size:
        raise ProtocolError('Frame shorter than its header: {} bytes'.format(len(data)))
    length, kind = parse_header(data[:FRAME_HEADER.size])
    payload = data[FRAME_HEADER.size:]
    if len(payload) != length:
        raise ProtocolError('Frame declares {} payload bytes, carries {}'.format(length, len(payload)))
    return kind, np.frombuffer(payload, dtype='<u8').astype(np.uint64)


@dataclass
class ChannelStats:
    rounds: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    opens: int = 0

    def snapshot(self):
        return replace(self)


class Channel(object):
    """Ordered frame channel between the two servers. One matched exchange is one round.
    Party 1 sends first and party 2 receives first, so large frames never deadlock a socket."""

    def __init__(self, party, params: rf.RingParams = rf.DEFAULT_PARAMS):
        self.party = sharing.check_party(party)
        self.params = params
        self.stats = ChannelStats()
        self.transcript = None  # set to a list to record every frame this side sends
        self.closed = False

    def _send_bytes(self, data: bytes):
        raise NotImplementedError

    def _recv_exact(self, n: int) -> bytes:
        raise NotImplementedError

    def send_frame(self, kind, values) -> int:
        if self.closed:
            raise TransportError('Channel of party {} is closed'.format(self.party))
        data = encode_frame(kind, values)
        self._send_bytes(data)
        if self.transcript is not None and kind != CONTROL:
            self.transcript.append((kind, np.asarray(values, dtype=np.uint64).ravel().copy()))
        return len(data)

    def recv_frame(self):
        if self.closed:
            raise TransportError('Channel of party {} is closed'.format(self.party))
        length, kind = parse_header(self._recv_exact(FRAME_HEADER.size))
        payload = self._recv_exact(length) if length else b''
        return kind, np.frombuffer(payload, dtype='<u8').astype(np.uint64), FRAME_HEADER.size + length

    def exchange(self, values, kind=SYNC) -> np.ndarray:
        values = np.asarray(values, dtype=np.uint64).ravel()
        if self.party == 1:
            sent = self.send_frame(kind, values)
            got_kind, other, received = self.recv_frame()
        else:
            got_kind, other, received = self.recv_frame()
            sent = self.send_frame(kind, values)
        if got_kind != kind:
            raise ProtocolError('Party {} expected a frame of kind {}, got {}'.format(self.party, kind, got_kind))
        if other.size != values.size:
            raise ProtocolError('Party {} sent {} elements, peer sent {}'.format(self.party, values.size, other.size))
        self.stats.rounds += 1
        self.stats.bytes_sent += sent
        self.stats.bytes_received += received
        return other

    def open(self, share: sharing.SharedVector) -> np.ndarray:
        """Reveal a batch of shared values to both parties in a single round."""
        other = self.exchange(share.values, OPEN)
        self.stats.opens += 1
        return rf.as_ring(rf.ring_add(share.values, other.reshape(share.shape), self.params), self.params)

    def handshake(self, session_id: int, digest: int):
        """Exchange the public session parameters. Not counted in the stats."""
        mine = np.array([cs.WIRE_MAGIC, cs.WIRE_VERSION, self.params.q, self.params.f,
                         session_id & 0xFFFFFFFFFFFFFFFF, digest & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        if self.party == 1:
            self.send_frame(CONTROL, mine)
            kind, theirs, _ = self.recv_frame()
        else:
            kind, theirs, _ = self.recv_frame()
            self.send_frame(CONTROL, mine)
        if kind != CONTROL or theirs.size != mine.size:
            raise HandshakeError('Malformed handshake from the peer of party {}'.format(self.party))
        for name, a, b in zip(HANDSHAKE_FIELDS, mine, theirs):
            if a != b:
                raise HandshakeError('Handshake mismatch on {}: ours {} theirs {}'.format(name, int(a), int(b)))
        LOG.info('party %d handshake ok (session %d)', self.party, session_id)

    def close(self):
        self.closed = True


class NullChannel(Channel):
    """Talks to nobody: every exchange returns zeros but is accounted like a real one. Used for dry runs of
    data-oblivious programs."""

    def exchange(self, values, kind=SYNC) -> np.ndarray:
        values = np.asarray(values, dtype=np.uint64).ravel()
        size = FRAME_HEADER.size + 8 * values.size
        self.stats.rounds += 1
        self.stats.bytes_sent += size
        self.stats.bytes_received += size
        return np.zeros_like(values)

    def handshake(self, session_id, digest):
        pass


class LoopbackChannel(Channel):
    """In-process channel over a pair of queues; frames are encoded exactly as on the wire."""

    def __init__(self, party, outbox: queue.Queue, inbox: queue.Queue, params: rf.RingParams = rf.DEFAULT_PARAMS,
                 timeout=cs.RECV_TIMEOUT):
        super().__init__(party, params)
        self._outbox = outbox
        self._inbox = inbox
        self._buffer = bytearray()
        self.timeout = timeout

    @classmethod
    def pair(cls, params: rf.RingParams = rf.DEFAULT_PARAMS, timeout=cs.RECV_TIMEOUT):
        a, b = queue.Queue(), queue.Queue()
        return cls(1, a, b, params, timeout), cls(2, b, a, params, timeout)

    def _send_bytes(self, data):
        self._outbox.put(bytes(data))

    def _recv_exact(self, n):
        while len(self._buffer) < n:
            try:
                chunk = self._inbox.get(timeout=self.timeout)
            except queue.Empty:
                raise TransportError('Peer of party {} silent for {}s'.format(self.party, self.timeout))
            if chunk is None:
                raise TransportError('Peer of party {} closed the channel'.format(self.party))
            self._buffer.extend(chunk)
        out = bytes(self._buffer[:n])
        del self._buffer[:n]
        return out

    def close(self):
        if not self.closed:
            self._outbox.put(None)
        super().close()


class TcpChannel(Channel):
    def __init__(self, party, sock: socket.socket, params: rf.RingParams = rf.DEFAULT_PARAMS,
                 timeout=cs.RECV_TIMEOUT):
        super().__init__(party, params)
        sock.settimeout(timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock

    def _send_bytes(self, data):
        try:
            self.sock.sendall(data)
        except OSError as e:
            raise TransportError('Send failed for party {}: {}'.format(self.party, e)) from e

    def _recv_exact(self, n):
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self.sock.recv(min(remaining, 1 << 20))
            except OSError as e:
                raise TransportError('Receive failed for party {}: {}'.format(self.party, e)) from e
            if not chunk:
                raise TransportError('Connection closed by the peer of party {}'.format(self.party))
            chunks.append(chunk)
            remaining -= len(chunk)
        return b''.join(chunks)

    def close(self):
        if not self.closed:
            try:
                self.sock.close()
            except OSError:
                pass
        super().close()


class PartyListener(object):
    """Party 1 side of the TCP deployment. Port 0 picks a free port (see .port)."""

    def __init__(self, host=cs.PARTY_HOST, port=cs.PARTY_PORT):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen(1)

    @property
    def port(self) -> int:
        return self.sock.getsockname()[1]

    def accept(self, params: rf.RingParams = rf.DEFAULT_PARAMS, timeout=cs.RECV_TIMEOUT,
               wrap_socket=None) -> TcpChannel:
        self.sock.settimeout(timeout)
        try:
            conn, addr = self.sock.accept()
        except OSError as e:
            raise TransportError('No peer connected: {}'.format(e)) from e
        LOG.info('party 1 accepted connection from %s', addr)
        # TLS would wrap the socket here; the deployment runs in plaintext by default.
        if wrap_socket is not None:
            conn = wrap_socket(conn)
        return TcpChannel(1, conn, params, timeout)

    def close(self):
        self.sock.close()


def connect(host=cs.PARTY_HOST, port=cs.PARTY_PORT, params: rf.RingParams = rf.DEFAULT_PARAMS,
            retries=cs.CONNECT_RETRIES, delay=cs.CONNECT_RETRY_DELAY, timeout=cs.RECV_TIMEOUT,
            wrap_socket=None) -> TcpChannel:
    """Party 2 side. Retries while party 1 is still starting up."""
    last = None
    for attempt in range(retries):
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            last = e
            LOG.debug('connect attempt %d to %s:%d failed: %s', attempt + 1, host, port, e)
            time.sleep(delay)
            continue
        if wrap_socket is not None:
            sock = wrap_socket(sock)
        return TcpChannel(2, sock, params, timeout)
    raise TransportError('Could not reach party 1 at {}:{} after {} attempts: {}'.format(host, port, retries, last))
