"""Two nodes exchange a connection request over the in-process fabric.

The same node code serves real HTTP; the fabric just replaces sockets with
function calls (plus a virtual clock), which makes multi-node flows fully
deterministic and fast enough for a unit test.
"""

from blade.server.acl import AclRule
from blade.simnet import SimNetwork

sim = SimNetwork(seed=2024)
alice = sim.spawn("alice")
bob = sim.spawn("bob")
alice.node.register("alice")
bob.node.register("bob")
bob.node.config.profile["display_name"] = "Bob from the registry demo"

# alice finds bob by prefix search over registered names
hits = sim.registry.search_names("bo")
print("search 'bo' ->", [record.name for record in hits])

# a connection request travels to bob's node and lands as pending_in
alice.node.send_connection_request("bob", "met you at the demo")
sim.settle()
inbox = bob.node.contacts.list("pending_in")
print("bob's inbox:", [(e.name, e.request_message) for e in inbox])

# bob accepts; both sides converge on accepted
bob.node.respond_connection_request(alice.address, "accept")
sim.settle()
print("alice sees bob as:", alice.node.contacts.get(bob.address).status)
print("bob sees alice as:", bob.node.contacts.get(alice.address).status)

# profiles are ACL-gated, default deny: before any rule, alice gets nothing
record = sim.registry.resolve_name("bob")
try:
    alice.node._send(record, "GET", "/base/profile", None)
except Exception as error:
    print("profile before ACL rule:", type(error).__name__)

# one rule later, accepted contacts may read the profile
bob.node.acl.add_rule(
    AclRule(
        subject="contacts",
        api_id="base",
        path_pattern="/profile",
        action="read",
        effect="allow",
    )
)
profile = alice.node._send(record, "GET", "/base/profile", None)
print("profile after ACL rule:", profile.data)
sim.close()
