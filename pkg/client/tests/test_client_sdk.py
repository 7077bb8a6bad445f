"""SDK behaviour against a scripted fake server: handshake, validation,
payload mirroring, and the reset/step state machine."""

import socket

import pytest

from sociogrid_client import (
    ClientError,
    HandshakeError,
    IllegalActionError,
    SeatRefusedError,
    SessionOver,
    VersionMismatchError,
    WireError,
    connect,
    default_action,
    template_of,
)
from wire_helpers import FakeServer, expect_join, hello, observe


def run(handler):
    return FakeServer(handler)


class TestConnect:
    def test_handshake_populates_session(self):
        def handler(peer):
            expect_join(peer, agent_id=None)
            peer.send(hello(agent_id="walker_2", episodes=7))

        server = run(handler)
        session = connect(server.endpoint)
        assert session.agent_id == "walker_2"
        assert session.episodes == 7
        session.close()
        server.finish()

    def test_requested_seat_sent_in_join(self):
        def handler(peer):
            expect_join(peer, agent_id="walker_1")
            peer.send(hello(agent_id="walker_1"))

        server = run(handler)
        session = connect(server.endpoint, agent_id="walker_1")
        assert session.agent_id == "walker_1"
        session.close()
        server.finish()

    def test_version_error_from_server(self):
        def handler(peer):
            peer.read()
            peer.send({"type": "error", "reason": "protocol_version"})

        server = run(handler)
        with pytest.raises(VersionMismatchError):
            connect(server.endpoint)
        server.finish()

    def test_hello_with_alien_version(self):
        def handler(peer):
            peer.read()
            peer.send(hello(protocol=99))

        server = run(handler)
        with pytest.raises(VersionMismatchError):
            connect(server.endpoint)
        server.finish()

    @pytest.mark.parametrize("reason", ["seat_unavailable", "roster_full"])
    def test_seat_refused(self, reason):
        def handler(peer):
            peer.read()
            peer.send({"type": "error", "reason": reason})

        server = run(handler)
        with pytest.raises(SeatRefusedError):
            connect(server.endpoint)
        server.finish()

    def test_refused_connection(self):
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()  # nothing listens here any more
        with pytest.raises(HandshakeError):
            connect(("127.0.0.1", port), timeout=2.0)

    def test_bad_endpoint_string(self):
        with pytest.raises(ValueError):
            connect("localhost")  # no port


class TestObservationMirroring:
    def test_payload_passes_through_untouched(self):
        payload_extra = {
            "inventory": {"wood": 2},
            "window": [{"position": [0, 0], "piles": {}}],
            "social": {"groups": [], "edges": []},
            "inbox": [{"from": "walker_1", "text": "hi"}],
            "position": [3, 4],
            "phase": {"stage": "physical", "selector": None},
            "valuation": "7/2",
        }

        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.send(observe(legal=["noop", "move:N"], **payload_extra))
            peer.read()  # the act
            peer.send(observe(t=1, reward={"raw": 0, "shared": 0}, done=True))

        server = run(handler)
        session = connect(server.endpoint)
        obs = session.reset()
        assert obs.episode == 0 and obs.t == 0 and obs.done is False
        assert obs.legal == ["noop", "move:N"]
        for key, value in payload_extra.items():
            assert obs[key] == value
        assert obs.inventory == {"wood": 2}
        assert obs.inbox[0]["text"] == "hi"
        assert obs.phase["stage"] == "physical"
        with pytest.raises(KeyError):
            obs["absent_field"]  # nothing fabricated
        assert "absent_field" not in obs
        session.step("noop")
        session.close()
        server.finish()

    def test_reward_mirrored_exactly(self):
        reward = {"raw": "3/2", "shared": "3/4"}

        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.send(observe(legal=["noop"]))
            peer.read()
            peer.send(observe(t=1, reward=reward, done=True))

        server = run(handler)
        session = connect(server.endpoint)
        session.reset()
        result = session.step("noop")
        assert result.reward == reward
        assert result.done is True
        assert result.info == {"episode": 0, "t": 1}
        session.close()
        server.finish()


class TestClientSideValidation:
    def make_session(self, legal):
        acts = []

        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.send(observe(legal=legal))
            try:
                acts.append(peer.read())
            except ConnectionError:
                pass

        server = run(handler)
        session = connect(server.endpoint)
        session.reset()
        return server, session, acts

    def test_illegal_template_never_sent(self):
        server, session, acts = self.make_session(["noop"])
        with pytest.raises(IllegalActionError):
            session.step("move:N")
        with pytest.raises(IllegalActionError):
            session.step({"verb": "pick", "target": "wood"})
        session.close()
        server.finish()
        assert acts == []  # nothing reached the wire

    def test_legal_template_expanded_and_sent(self):
        server, session, acts = self.make_session(["move:N", "noop"])
        with pytest.raises(WireError):
            session.step("move:N")  # fake server hangs up after reading
        server.finish()
        assert acts == [
            {
                "type": "act",
                "episode": 0,
                "t": 0,
                "action": {"verb": "move", "target": "N"},
            }
        ]

    def test_dict_action_passes_through_verbatim(self):
        server, session, acts = self.make_session(["propose", "noop"])
        with pytest.raises(WireError):
            session.step({"verb": "propose", "value": "57/100"})
        server.finish()
        assert acts[0]["action"] == {"verb": "propose", "value": "57/100"}

    def test_non_action_rejected(self):
        server, session, acts = self.make_session(["noop"])
        with pytest.raises(IllegalActionError):
            session.step(42)
        session.close()
        server.finish()
        assert acts == []


class TestDefaultAction:
    @pytest.mark.parametrize(
        "template,expected",
        [
            ("move:N", {"verb": "move", "target": "N"}),
            ("pick:wood", {"verb": "pick", "target": "wood"}),
            ("dump:stone", {"verb": "dump", "target": "stone"}),
            ("connect:group_0", {"verb": "connect", "target": "group_0"}),
            ("disconnect:a", {"verb": "disconnect", "target": "a"}),
            ("select_group:g", {"verb": "select_group", "target": "g"}),
            ("request:walker_1", {"verb": "request", "target": "walker_1"}),
            ("message:walker_1", {"verb": "message", "target": "walker_1", "text": ""}),
            ("synthesize", {"verb": "synthesize"}),
            ("noop", {"verb": "noop"}),
            ("accept", {"verb": "accept"}),
            ("decline", {"verb": "decline"}),
            ("propose", {"verb": "propose", "value": "1/2"}),
        ],
    )
    def test_expansion_table(self, template, expected):
        assert default_action(template) == expected

    def test_propose_share_reduced(self):
        assert default_action("propose", share="50/100") == {
            "verb": "propose",
            "value": "1/2",
        }
        assert default_action("propose", share=1) == {
            "verb": "propose",
            "value": 1,
        }

    def test_message_text_override(self):
        assert default_action("message:a", text="ping") == {
            "verb": "message",
            "target": "a",
            "text": "ping",
        }

    def test_unknown_or_malformed_templates(self):
        with pytest.raises(ValueError):
            default_action("teleport")
        with pytest.raises(ValueError):
            default_action("move")  # missing target
        with pytest.raises(ValueError):
            default_action("synthesize:here")  # spurious target

    def test_template_of_matches_wire_naming(self):
        assert template_of({"verb": "move", "target": "N"}) == "move:N"
        assert template_of({"verb": "propose", "value": "1/2"}) == "propose"
        assert template_of({"verb": "synthesize"}) == "synthesize"


class TestEpisodeLoop:
    def test_full_two_episode_session(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello(episodes=2))
            for episode in range(2):
                peer.send(observe(episode=episode, t=0, legal=["noop"]))
                act = peer.read()
                assert act == {
                    "type": "act",
                    "episode": episode,
                    "t": 0,
                    "action": {"verb": "noop"},
                }
                peer.send(
                    observe(
                        episode=episode,
                        t=1,
                        reward={"raw": 0, "shared": 0},
                        done=True,
                    )
                )
                peer.send({"type": "end", "episode": episode, "steps": 1})
            peer.send({"type": "bye"})

        server = run(handler)
        session = connect(server.endpoint)
        seen = []
        for _ in range(2):
            obs = session.reset()
            while not obs.done:
                obs = session.step("noop").observation
            seen.append(obs.episode)
        with pytest.raises(SessionOver):
            session.reset()
        server.finish()
        assert seen == [0, 1]
        assert [r["episode"] for r in session.results()] == [0, 1]
        assert session.errors == []

    def test_drain_collects_trailing_records(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.send(observe(t=0, done=True, legal=[]))
            peer.send({"type": "end", "episode": 0, "steps": 0})
            peer.send({"type": "bye"})

        server = run(handler)
        session = connect(server.endpoint)
        obs = session.reset()
        assert obs.done
        session.drain()
        server.finish()
        assert len(session.results()) == 1

    def test_step_before_reset_refused(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello())

        server = run(handler)
        session = connect(server.endpoint)
        with pytest.raises(ClientError):
            session.step("noop")
        session.close()
        server.finish()

    def test_step_after_done_refused(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.send(observe(done=True, legal=[]))

        server = run(handler)
        session = connect(server.endpoint)
        session.reset()
        with pytest.raises(ClientError):
            session.step("noop")
        session.close()
        server.finish()

    def test_reset_mid_episode_refused(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.send(observe(legal=["noop"]))

        server = run(handler)
        session = connect(server.endpoint)
        session.reset()
        with pytest.raises(ClientError):
            session.reset()
        session.close()
        server.finish()

    def test_error_records_kept_not_raised(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.send(observe(legal=["noop"]))
            peer.read()
            peer.send({"type": "error", "reason": "stale_act"})
            peer.send(observe(t=1, reward={"raw": 0, "shared": 0}, done=True))

        server = run(handler)
        session = connect(server.endpoint)
        session.reset()
        result = session.step("noop")
        assert result.done
        assert session.errors == [{"type": "error", "reason": "stale_act"}]
        session.close()
        server.finish()

    def test_stream_cut_raises_wire_error(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            # hang up without serving an observation

        server = run(handler)
        session = connect(server.endpoint)
        with pytest.raises(WireError):
            session.reset()
        server.finish()

    def test_garbage_line_raises_wire_error(self):
        def handler(peer):
            expect_join(peer)
            peer.send(hello())
            peer.conn.sendall(b"not json\n")

        server = run(handler)
        session = connect(server.endpoint)
        with pytest.raises(WireError):
            session.reset()
        session.close()
        server.finish()
