"""Load the bundled mini knowledge graph and walk it.

Shows the three core graph operations: adjacency lookup (both directions),
plan execution, and plan enumeration between entity sets.
"""
from kgqa import enumerate_plans, execute_plan
from kgqa.fixtures import load_nato_store

store = load_nato_store()
print(f"loaded {len(store.triples)} triples over {len(store.entities)} entities\n")

for triple in sorted(store.triples):
    print("  ", " -> ".join(triple))

print("\nforward adjacency: NATO --organization.headquarters-->",
      store.search_adjacent("NATO", "organization.headquarters"))
print("inverse adjacency: m.04300hm --organization.headquarters^-1-->",
      store.search_adjacent("m.04300hm", "organization.headquarters^-1"))
print("relations at NATO:", store.relations_of("NATO"))

plan = ("organization.headquarters", "mailing_address.citytown")
print(f"\nexecuting plan {plan} from NATO ->", execute_plan(store, {"NATO"}, plan))

print("\nall plans (length <= 2) from NATO to Brussels:")
for found in enumerate_plans(store, {"NATO"}, {"Brussels"}, max_len=2):
    print("  ", list(found.relations))
