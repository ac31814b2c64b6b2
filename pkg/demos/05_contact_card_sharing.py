"""The contact-database module: subscriptions, pushes, selective disclosure.

A publisher registers the module in the marketplace; nodes install it after
verifying the package hash; subscribers receive pushed card updates filtered
per subscriber at the source.
"""

from blade.modules.api import AdminRequest
from blade.server.acl import AclRule
from blade.simnet import SimNetwork
from blade.simnet.scenarios import ACTIONS

sim = SimNetwork(seed=99)
for name in ("owner", "ann", "ben", "publisher"):
    sim.spawn(name).node.register(name)

# publisher puts the module on the marketplace (org + api + module records)
sim.context.update({})
ACTIONS["create_org"](sim, sim["publisher"], {"label": "org"})
ACTIONS["register_api"](sim, sim["publisher"],
                        {"label": "contacts", "name": "contacts", "version": "1.0.0"})
published = ACTIONS["publish_module"](
    sim, sim["publisher"],
    {"label": "contactdb", "name": "contact-db", "version": "1.0.0",
     "apis": ["contacts"]},
)
print("published:", published["module_id"][:16], "hash", published["package_hash"][:16])

api_id = sim.context["api:contacts"]
for name in ("owner", "ann", "ben"):
    ACTIONS["install_module"](sim, sim[name], {"module": "contactdb"})
print("module installed on owner, ann, ben (hash-verified)")


def c2s(name, method, path, data=None):
    return sim[name].node.host.invoke_c2s(
        api_id, AdminRequest(method=method, path=path, data=data)
    )


owner = sim["owner"].node
for i, name in enumerate(("ann", "ben")):
    for action in ("read", "write"):
        owner.acl.add_rule(
            AclRule(subject=sim[name].address.text, api_id=api_id,
                    path_pattern="*", action=action, effect="allow",
                    priority=100 + i)
        )

# field-level disclosure: ann may see email, ben only the display name
c2s("owner", "PUT", "/field-acl", [
    [sim["ann"].address.text, "display_name", "allow"],
    [sim["ann"].address.text, "email", "allow"],
    [sim["ben"].address.text, "display_name", "allow"],
])

c2s("ann", "POST", "/subscribe", {"target": owner.address.text})
c2s("ben", "POST", "/subscribe", {"target": owner.address.text})
sim.settle()

c2s("owner", "PUT", "/card", {
    "display_name": "The Owner",
    "email": "owner@example",
    "phone": "+1 555 0100",
})
sim.settle()

print("owner card :", c2s("owner", "GET", "/card")["fields"])
print("ann mirror :", c2s("ann", "GET", "/mirrors")[0]["fields"])
print("ben mirror :", c2s("ben", "GET", "/mirrors")[0]["fields"])
# phone was never disclosed to anyone; ben never saw the email
sim.close()
