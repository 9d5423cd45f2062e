import logging
import os
import sys
import threading
import xmlrpc.client
from xmlrpc.server import SimpleXMLRPCServer

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import constants as cs
import ring_fixed as rf
import sharing
import transport
import truthfind_mpc as tm
import truthfind_plain as tp

LOG = logging.getLogger(__name__)

DEBUG = False


class ReleaseCollector(object):
    """Client side of the output release: keeps the packed shares from each server and reconstructs once both
    have arrived."""

    def __init__(self, params: rf.RingParams = rf.DEFAULT_PARAMS, iteration=0, algorithm=None):
        self.params = params
        self.iteration = iteration
        self.algorithm = algorithm
        self.received = {}
        self.state = None
        self.done = threading.Event()

    def submit_shares(self, party, data):
        party = sharing.check_party(party)
        if party in self.received:
            raise transport.ProtocolError('Party {} already released its shares'.format(party))
        data = data.data if isinstance(data, xmlrpc.client.Binary) else bytes(data)
        tm.unpack_state(data)
        other = 3 - party
        if other in self.received:
            pair = (data, self.received[other]) if party == 1 else (self.received[other], data)
            self.state = tm.reconstruct_release(pair[0], pair[1], self.params, self.iteration)
        self.received[party] = data
        print('Received {} bytes of output shares from party {}'.format(len(data), party))
        if self.state is not None:
            self.done.set()
        return True

    def labels(self):
        if self.state is None or self.algorithm is None:
            return None
        return tp.labels_of(self.state, self.algorithm)


def make_server(collector: ReleaseCollector, host=cs.RELEASE_HOST, port=cs.RELEASE_PORT) -> SimpleXMLRPCServer:
    server = SimpleXMLRPCServer((host, port), logRequests=DEBUG, allow_none=True)
    server.register_function(collector.submit_shares, 'submit_shares')
    return server


def serve_until_released(collector: ReleaseCollector, host=cs.RELEASE_HOST, port=cs.RELEASE_PORT, server=None):
    """Handles requests until both parties have released, then returns the reconstructed TruthState."""
    server = server or make_server(collector, host, port)
    print('Release endpoint listening on {}:{}. Press ctrl+c to shut it down.'.format(*server.server_address))
    server.timeout = 0.5
    try:
        while not collector.done.is_set():
            server.handle_request()
    except KeyboardInterrupt:
        print('Release endpoint shutting down...')
    finally:
        server.server_close()
    return collector.state


class ReleaseClient(object):
    """What a server holds to reach the client's release endpoint."""

    def __init__(self, host=cs.RELEASE_HOST, port=cs.RELEASE_PORT):
        self.url = 'http://{}:{}'.format(host, port)

    def submit_shares(self, party, data):
        try:
            proxy = xmlrpc.client.ServerProxy(self.url)
            return proxy.submit_shares(party, data)
        except xmlrpc.client.Fault as fault:
            raise transport.ProtocolError('Release endpoint refused the shares: {}'.format(fault.faultString))
        except OSError as e:
            raise transport.TransportError('Release endpoint not found at {}: {}'.format(self.url, e)) from e


if __name__ == '__main__':
    import argparse
    from session_config import SessionConfig

    parser = argparse.ArgumentParser(description='Collect the output shares of both servers and reconstruct.')
    parser.add_argument('--config', required=True)
    args = parser.parse_args()
    session = SessionConfig.load(args.config)
    COLLECTOR = ReleaseCollector(session.params, session.iters, session.algorithm)
    STATE = serve_until_released(COLLECTOR, session.release_host or cs.RELEASE_HOST, session.release_port)
    if STATE is not None:
        print('y =', STATE.y)
        print('labels =', COLLECTOR.labels())
