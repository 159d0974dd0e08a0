from rest_framework import serializers


class SpecSerializer(serializers.Serializer):
    spec = serializers.CharField(trim_whitespace=False)
    # Further packages, e.g. the targets of refinements
    extra_specs = serializers.ListField(
        child=serializers.CharField(trim_whitespace=False), required=False, default=list
    )


class GraphSerializer(SpecSerializer):
    message = serializers.CharField()


class ValidateSerializer(GraphSerializer):
    hex = serializers.CharField(allow_blank=True, trim_whitespace=False, help_text="message bytes")
    field_names = serializers.ListField(child=serializers.CharField(), required=False, default=list)

    def validate_hex(self, value):
        try:
            return bytes.fromhex("".join(value.split()))
        except ValueError:
            raise serializers.ValidationError("hex must be hexadecimal digits")
